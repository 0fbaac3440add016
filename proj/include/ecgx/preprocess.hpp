#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecgx/ecg_io.hpp"
#include "ecgx/filter.hpp"

namespace ecgx {

struct FilterSpec {
  double low_cut = 0.5;
  double high_cut = 40.0;
  int order = 4;
  bool zero_phase = true;

  // Throws InvalidFilter unless 0 < low_cut < high_cut < fs/2 and order is even.
  void validate(int fs) const;
};

SosCascade design_bandpass(const FilterSpec& spec, int fs);

// Per-lead Butterworth band-pass. Zero-phase runs forward and backward with
// one second of reflection padding at both ends.
EcgRecord bandpass(const EcgRecord& record, const FilterSpec& spec);

// Cutoff of the anti-alias filter used by resample, relative to target fs.
inline constexpr double kAntiAliasFraction = 0.45;
inline constexpr int kAntiAliasOrder = 8;

// Integer-factor decimation after a zero-phase anti-alias low-pass.
// Throws UnsupportedResample when fs is not a multiple of target_fs.
EcgRecord resample(const EcgRecord& record, int target_fs);

enum class LeadConfigName { All12, LeadII, FourLead, SixLead, Custom };

struct LeadConfig {
  LeadConfigName name = LeadConfigName::All12;
  std::vector<LeadId> leads;

  static LeadConfig all12();
  static LeadConfig lead_ii();
  static LeadConfig four_lead();
  static LeadConfig six_lead();
  static LeadConfig custom(std::vector<LeadId> leads);
  // Accepts ALL12, LEAD_II, FOUR_LEAD, SIX_LEAD or a comma list of leads.
  static LeadConfig parse(std::string_view text);

  std::string to_string() const;
};

// Throws MissingLead when a configured lead is absent.
EcgRecord select_leads(const EcgRecord& record, const LeadConfig& config);

// Per-lead z-score; a lead with zero standard deviation becomes all zeros.
EcgRecord normalize_signal(const EcgRecord& record);

// Target min-max scaling to [0, 1].
class MinMaxScaler {
 public:
  MinMaxScaler() = default;
  MinMaxScaler(std::vector<std::string> features, std::vector<double> mins,
               std::vector<double> maxs);

  const std::vector<std::string>& features() const { return features_; }
  std::size_t size() const { return features_.size(); }
  double min(std::size_t i) const { return mins_[i]; }
  double max(std::size_t i) const { return maxs_[i]; }
  bool is_constant(std::size_t i) const { return maxs_[i] == mins_[i]; }

  double scale(std::size_t feature, double value) const;
  double unscale(std::size_t feature, double value) const;
  std::vector<double> scale(std::span<const double> values) const;
  std::vector<double> unscale(std::span<const double> values) const;

 private:
  std::vector<std::string> features_;
  std::vector<double> mins_;
  std::vector<double> maxs_;
};

// Fits on the non-missing cells of the listed records (all rows when
// `record_ids` is empty). Throws UnfittedFeature for a feature with no
// observed value.
MinMaxScaler fit_scaler(const FeatureTable& train_targets, const std::vector<std::string>& features,
                        const std::vector<std::string>& record_ids = {});

}  // namespace ecgx
