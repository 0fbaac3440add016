#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ecgx {

// The twelve standard leads, in the conventional display order.
enum class LeadId : std::uint8_t { I, II, III, aVR, aVL, aVF, V1, V2, V3, V4, V5, V6 };

inline constexpr std::size_t kNumLeads = 12;
inline constexpr std::array<LeadId, kNumLeads> kAllLeads = {
    LeadId::I,  LeadId::II, LeadId::III, LeadId::aVR, LeadId::aVL, LeadId::aVF,
    LeadId::V1, LeadId::V2, LeadId::V3,  LeadId::V4,  LeadId::V5,  LeadId::V6};

std::string_view lead_name(LeadId lead);
// Case-insensitive; throws UnknownLead.
LeadId parse_lead(std::string_view label);
std::optional<LeadId> try_parse_lead(std::string_view label);
inline std::size_t lead_index(LeadId lead) { return static_cast<std::size_t>(lead); }

// One multi-lead recording. Samples are stored lead-major: lead i occupies
// [i * n_samples, (i + 1) * n_samples).
struct EcgRecord {
  std::string record_id;
  int fs = 0;
  std::vector<LeadId> leads;
  std::size_t n_samples = 0;
  std::vector<double> samples;

  std::size_t n_leads() const { return leads.size(); }
  std::span<double> lead(std::size_t row) {
    return {samples.data() + row * n_samples, n_samples};
  }
  std::span<const double> lead(std::size_t row) const {
    return {samples.data() + row * n_samples, n_samples};
  }
  std::optional<std::size_t> row_of(LeadId id) const;
  double duration_seconds() const { return static_cast<double>(n_samples) / fs; }

  // Throws CorruptRecord when shape, fs or sample finiteness is violated.
  void validate() const;
};

enum class Unit { Milliseconds, Microvolts, Bpm, Degrees, Unitless };

std::string_view unit_name(Unit unit);
// Unit guessed from PTB-XL+ style feature names (e.g. "_Amp" -> uV).
Unit infer_unit(std::string_view feature_name);

using FeatureRow = std::vector<std::optional<double>>;

// Record-id keyed feature values. Missing cells are std::nullopt.
struct FeatureTable {
  std::vector<std::string> feature_names;
  std::vector<Unit> units;
  std::map<std::string, FeatureRow> rows;

  std::optional<std::size_t> column_of(std::string_view name) const;
  std::size_t column_or_throw(std::string_view name) const;
  std::optional<double> get(const std::string& record_id, std::string_view feature) const;
  // Adds a feature column (all missing) if absent, returns its index.
  std::size_t ensure_column(const std::string& name);
  void set(const std::string& record_id, std::string_view feature, std::optional<double> value);
  // Sub-table restricted to the named columns, in the given order.
  FeatureTable select(const std::vector<std::string>& features) const;
};

FeatureTable read_feature_csv(const std::filesystem::path& path,
                              std::string_view id_column = "ecg_id");
void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path,
                       std::string_view id_column = "ecg_id");

// WFDB header + format-16 signal file.
EcgRecord read_wfdb_record(const std::filesystem::path& header_path);

struct WfdbWriteOptions {
  double gain = 1000.0;  // ADC units per mV
  int baseline = 0;
};
// Writes <dir>/<record_id>.hea and <dir>/<record_id>.dat; returns the header path.
std::filesystem::path write_wfdb_record(const EcgRecord& record, const std::filesystem::path& dir,
                                        const WfdbWriteOptions& options = {});

struct ManifestEntry {
  std::string record_id;
  std::filesystem::path signal_path;
  int fold = 1;
};

struct SplitRule {
  std::vector<int> train_folds{1, 2, 3, 4, 5, 6, 7, 8};
  int val_fold = 9;
  int test_fold = 10;
};

enum class Split { Train, Val, Test };

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  SplitRule split_rule;
};

// CSV with columns ecg_id,path,strat_fold. Relative paths resolve against
// the manifest's directory.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Records whose fold belongs to the requested split, in manifest order.
// Folds not named by the rule are treated as training folds so the three
// splits always cover every entry.
std::vector<std::string> select_split(const DatasetManifest& manifest, Split which);

// Small CSV helpers shared by the readers.
std::vector<std::string> split_csv_line(std::string_view line);
std::string format_real(double value, int significant_digits = 17);

}  // namespace ecgx
