#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecgx/ecg_io.hpp"
#include "ecgx/grouping.hpp"

namespace ecgx {

// Ground truth and prediction pairs with every missing pair removed.
struct PairedSeries {
  std::vector<double> y_test;
  std::vector<double> y_hat;

  std::size_t n() const { return y_test.size(); }
  // Listwise deletion: a pair is kept only when both members are present.
  static PairedSeries from_optional(std::span<const std::optional<double>> truth,
                                    std::span<const std::optional<double>> predicted);
};

// Pearson correlation via mean-centred sums. Throws InsufficientData when
// n < 2 and UndefinedPcc when either series has zero variance.
double pcc(const PairedSeries& series);
double pcc(std::span<const double> a, std::span<const double> b);
// The same, with undefined results reported as std::nullopt.
std::optional<double> try_pcc(const PairedSeries& series);

// Pairs truth and prediction columns by record id.
PairedSeries pair_columns(const FeatureTable& truth, const std::string& truth_feature,
                          const FeatureTable& predicted, const std::string& predicted_feature);

struct LeadStats {
  double mean = 0.0;
  double variance = 0.0;  // population variance across leads
  LeadId best_lead = LeadId::I;
};

// Ties in the maximum go to the lead that comes first in standard order.
LeadStats lead_stats(const std::map<LeadId, double>& per_lead_pcc);

// Two-stage average for multi-output groups: per group, the mean score of
// the feature's instances in that group; then the mean of those group
// scores over every group containing the feature. Scores are keyed by
// instance column (e.g. R_Amp_II); the result is keyed by base feature.
std::map<std::string, double> group_average_score(const std::map<std::string, double>& per_instance,
                                                  const GroupingScheme& scheme);

enum class Winner { Ours, External, Tie, Undefined };
std::string_view winner_name(Winner w);

struct ComparisonRow {
  std::string feature;
  std::optional<double> pcc_ours;
  std::optional<double> pcc_external;
  std::size_t n_pairs = 0;
  Winner winner = Winner::Undefined;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
};

// `name_map` maps our feature names to external column names; features not
// in the map use the same name in both tables.
ComparisonReport compare_external(const FeatureTable& ours, const FeatureTable& external,
                                  const FeatureTable& truth, const std::vector<std::string>& features,
                                  const std::map<std::string, std::string>& name_map = {});

struct TopK {
  std::vector<std::string> features;  // ranked by external PCC, best first
  bool clamped = false;               // fewer than k features were available
};

// Keeps the k features whose external PCC is highest (undefined PCCs excluded).
TopK top_k_external(const ComparisonReport& report, std::size_t k);
void write_comparison_csv(const ComparisonReport& report, const std::filesystem::path& path);

struct GlobalFeatureResult {
  std::string feature;
  std::optional<double> pcc;
  std::size_t n_pairs = 0;
};

struct LeadFeatureResult {
  std::string feature;
  std::map<LeadId, double> per_lead_pcc;
  std::map<LeadId, std::size_t> per_lead_pairs;
  std::optional<LeadStats> stats;  // absent when no lead has a defined PCC
  std::size_t n_pairs = 0;
};

struct EvalReport {
  std::vector<GlobalFeatureResult> global;
  std::vector<LeadFeatureResult> lead_specific;
  std::map<std::string, double> timings;
  std::map<std::string, std::string> metadata;

  bool operator==(const EvalReport&) const;
};

// Builds lead statistics from per-lead PCCs (undefined leads are skipped).
LeadFeatureResult make_lead_result(const std::string& feature,
                                   const std::map<LeadId, std::optional<double>>& per_lead_pcc,
                                   const std::map<LeadId, std::size_t>& per_lead_pairs = {});

// PCC per predicted column against truth. Plain columns become global
// results; <feature>_<lead> columns are gathered into lead results.
EvalReport build_report(const FeatureTable& truth, const FeatureTable& predicted,
                        const std::vector<std::string>& columns);

enum class ReportFormat { Csv, Json };

// CSV: global.csv (feature,pcc,n_pairs), lead.csv
// (feature,pcc,variance,best_lead,n_pairs) and lead_detail.csv
// (feature,lead,pcc,n_pairs), each preceded by "# key=value" provenance
// lines. JSON: report.json with the same content. Reals use 6 significant
// digits. Returns the written paths.
std::vector<std::filesystem::path> emit_report(const EvalReport& report, ReportFormat format,
                                               const std::filesystem::path& dir);
EvalReport parse_report(const std::filesystem::path& dir, ReportFormat format);

}  // namespace ecgx
