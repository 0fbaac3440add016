#include "ecgx/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ecgx/error.hpp"

namespace ecgx {

void FilterSpec::validate(int fs) const {
  if (order < 2 || order % 2 != 0) {
    throw Error(ErrorKind::InvalidFilter, "filter order must be a positive even integer");
  }
  if (!(low_cut > 0.0 && low_cut < high_cut)) {
    throw Error(ErrorKind::InvalidFilter, "filter band needs 0 < low_cut < high_cut");
  }
  if (!(high_cut < fs / 2.0)) {
    throw Error(ErrorKind::InvalidFilter, "high_cut " + format_real(high_cut, 6) +
                                              " Hz is not below Nyquist for fs=" +
                                              std::to_string(fs));
  }
}

SosCascade design_bandpass(const FilterSpec& spec, int fs) {
  spec.validate(fs);
  return butterworth_bandpass(spec.order, spec.low_cut, spec.high_cut, fs);
}

EcgRecord bandpass(const EcgRecord& record, const FilterSpec& spec) {
  const auto sos = design_bandpass(spec, record.fs);
  EcgRecord out = record;
  const auto pad = static_cast<std::size_t>(record.fs);
  for (std::size_t row = 0; row < out.n_leads(); ++row) {
    auto lead = out.lead(row);
    if (spec.zero_phase) {
      sos_filtfilt(sos, lead, pad);
    } else {
      std::vector<double> state(2 * sos.size(), 0.0);
      sos_filter(sos, lead, state);
    }
  }
  return out;
}

EcgRecord resample(const EcgRecord& record, int target_fs) {
  if (target_fs <= 0 || record.fs % target_fs != 0) {
    throw Error(ErrorKind::UnsupportedResample,
                "cannot resample " + std::to_string(record.fs) + " Hz to " +
                    std::to_string(target_fs) + " Hz: only integer-factor decimation is supported");
  }
  if (target_fs == record.fs) return record;
  const auto factor = static_cast<std::size_t>(record.fs / target_fs);
  const auto sos = butterworth_lowpass(kAntiAliasOrder, kAntiAliasFraction * target_fs, record.fs);
  EcgRecord out;
  out.record_id = record.record_id;
  out.fs = target_fs;
  out.leads = record.leads;
  out.n_samples = record.n_samples / factor;
  out.samples.resize(out.n_leads() * out.n_samples);
  std::vector<double> lead;
  for (std::size_t row = 0; row < record.n_leads(); ++row) {
    const auto src = record.lead(row);
    lead.assign(src.begin(), src.end());
    sos_filtfilt(sos, lead, static_cast<std::size_t>(record.fs));
    auto dst = out.lead(row);
    for (std::size_t i = 0; i < out.n_samples; ++i) dst[i] = lead[i * factor];
  }
  return out;
}

LeadConfig LeadConfig::all12() {
  return {LeadConfigName::All12, std::vector<LeadId>(kAllLeads.begin(), kAllLeads.end())};
}
LeadConfig LeadConfig::lead_ii() { return {LeadConfigName::LeadII, {LeadId::II}}; }
LeadConfig LeadConfig::four_lead() {
  return {LeadConfigName::FourLead, {LeadId::II, LeadId::aVR, LeadId::V1, LeadId::V4}};
}
LeadConfig LeadConfig::six_lead() {
  return {LeadConfigName::SixLead,
          {LeadId::I, LeadId::II, LeadId::III, LeadId::aVF, LeadId::aVR, LeadId::aVL}};
}
LeadConfig LeadConfig::custom(std::vector<LeadId> leads) {
  if (leads.empty()) throw Error(ErrorKind::ConfigError, "custom lead configuration is empty");
  return {LeadConfigName::Custom, std::move(leads)};
}

LeadConfig LeadConfig::parse(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "ALL12") return all12();
  if (upper == "LEAD_II") return lead_ii();
  if (upper == "FOUR_LEAD") return four_lead();
  if (upper == "SIX_LEAD") return six_lead();
  std::vector<LeadId> leads;
  for (const auto& cell : split_csv_line(text)) leads.push_back(parse_lead(cell));
  return custom(std::move(leads));
}

std::string LeadConfig::to_string() const {
  switch (name) {
    case LeadConfigName::All12: return "ALL12";
    case LeadConfigName::LeadII: return "LEAD_II";
    case LeadConfigName::FourLead: return "FOUR_LEAD";
    case LeadConfigName::SixLead: return "SIX_LEAD";
    case LeadConfigName::Custom: break;
  }
  std::string out;
  for (std::size_t i = 0; i < leads.size(); ++i) {
    if (i) out += ',';
    out += lead_name(leads[i]);
  }
  return out;
}

EcgRecord select_leads(const EcgRecord& record, const LeadConfig& config) {
  EcgRecord out;
  out.record_id = record.record_id;
  out.fs = record.fs;
  out.n_samples = record.n_samples;
  out.leads = config.leads;
  out.samples.resize(config.leads.size() * record.n_samples);
  for (std::size_t i = 0; i < config.leads.size(); ++i) {
    const auto row = record.row_of(config.leads[i]);
    if (!row) {
      throw Error(ErrorKind::MissingLead, record.record_id + ": lead " +
                                              std::string(lead_name(config.leads[i])) +
                                              " is not present");
    }
    const auto src = record.lead(*row);
    std::copy(src.begin(), src.end(), out.lead(i).begin());
  }
  return out;
}

EcgRecord normalize_signal(const EcgRecord& record) {
  EcgRecord out = record;
  for (std::size_t row = 0; row < out.n_leads(); ++row) {
    auto lead = out.lead(row);
    if (lead.empty()) continue;
    double mean = 0.0;
    for (double v : lead) mean += v;
    mean /= static_cast<double>(lead.size());
    double ss = 0.0;
    for (double v : lead) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(lead.size()));
    if (sd == 0.0) {
      std::fill(lead.begin(), lead.end(), 0.0);
    } else {
      for (double& v : lead) v = (v - mean) / sd;
    }
  }
  return out;
}

MinMaxScaler::MinMaxScaler(std::vector<std::string> features, std::vector<double> mins,
                           std::vector<double> maxs)
    : features_(std::move(features)), mins_(std::move(mins)), maxs_(std::move(maxs)) {
  if (mins_.size() != features_.size() || maxs_.size() != features_.size()) {
    throw Error(ErrorKind::ConfigError, "scaler bounds do not match its feature list");
  }
  for (std::size_t i = 0; i < mins_.size(); ++i) {
    if (!(mins_[i] <= maxs_[i])) {
      throw Error(ErrorKind::ConfigError, "scaler min exceeds max for " + features_[i]);
    }
  }
}

double MinMaxScaler::scale(std::size_t i, double value) const {
  if (is_constant(i)) return 0.0;
  return (value - mins_[i]) / (maxs_[i] - mins_[i]);
}

double MinMaxScaler::unscale(std::size_t i, double value) const {
  if (is_constant(i)) return mins_[i];
  return value * (maxs_[i] - mins_[i]) + mins_[i];
}

std::vector<double> MinMaxScaler::scale(std::span<const double> values) const {
  if (values.size() != size()) throw Error(ErrorKind::ShapeError, "scale: width mismatch");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = scale(i, values[i]);
  return out;
}

std::vector<double> MinMaxScaler::unscale(std::span<const double> values) const {
  if (values.size() != size()) throw Error(ErrorKind::ShapeError, "unscale: width mismatch");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = unscale(i, values[i]);
  return out;
}

MinMaxScaler fit_scaler(const FeatureTable& table, const std::vector<std::string>& features,
                        const std::vector<std::string>& record_ids) {
  std::vector<double> mins(features.size(), std::numeric_limits<double>::infinity());
  std::vector<double> maxs(features.size(), -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> cols;
  for (const auto& f : features) cols.push_back(table.column_or_throw(f));
  auto visit = [&](const FeatureRow& row) {
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (const auto& cell = row[cols[k]]) {
        mins[k] = std::min(mins[k], *cell);
        maxs[k] = std::max(maxs[k], *cell);
      }
    }
  };
  if (record_ids.empty()) {
    for (const auto& [id, row] : table.rows) visit(row);
  } else {
    for (const auto& id : record_ids) {
      if (auto it = table.rows.find(id); it != table.rows.end()) visit(it->second);
    }
  }
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (mins[k] > maxs[k]) {
      throw Error(ErrorKind::UnfittedFeature,
                  "feature '" + features[k] + "' has no observed training value");
    }
  }
  return MinMaxScaler(features, std::move(mins), std::move(maxs));
}

}  // namespace ecgx
