#include "ecgx/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ecgx/error.hpp"

namespace ecgx {

PairedSeries PairedSeries::from_optional(std::span<const std::optional<double>> truth,
                                         std::span<const std::optional<double>> predicted) {
  if (truth.size() != predicted.size()) {
    throw Error(ErrorKind::ShapeError, "paired series need equal lengths");
  }
  PairedSeries s;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] && predicted[i]) {
      s.y_test.push_back(*truth[i]);
      s.y_hat.push_back(*predicted[i]);
    }
  }
  return s;
}

double pcc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::ShapeError, "pcc: series lengths differ");
  const std::size_t n = a.size();
  if (n < 2) throw Error(ErrorKind::InsufficientData, "pcc needs at least two pairs");
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(a) || constant(b)) throw Error(ErrorKind::UndefinedPcc, "pcc: zero variance");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw Error(ErrorKind::UndefinedPcc, "pcc: zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pcc(const PairedSeries& series) { return pcc(series.y_test, series.y_hat); }

std::optional<double> try_pcc(const PairedSeries& series) {
  try {
    return pcc(series);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::UndefinedPcc || e.kind() == ErrorKind::InsufficientData) {
      return std::nullopt;
    }
    throw;
  }
}

PairedSeries pair_columns(const FeatureTable& truth, const std::string& truth_feature,
                          const FeatureTable& predicted, const std::string& predicted_feature) {
  const std::size_t tc = truth.column_or_throw(truth_feature);
  const std::size_t pc = predicted.column_or_throw(predicted_feature);
  PairedSeries s;
  for (const auto& [id, prow] : predicted.rows) {
    auto it = truth.rows.find(id);
    if (it == truth.rows.end()) continue;
    if (it->second[tc] && prow[pc]) {
      s.y_test.push_back(*it->second[tc]);
      s.y_hat.push_back(*prow[pc]);
    }
  }
  return s;
}

LeadStats lead_stats(const std::map<LeadId, double>& per_lead) {
  if (per_lead.empty()) throw Error(ErrorKind::InsufficientData, "lead_stats needs at least one lead");
  LeadStats s;
  double best = -std::numeric_limits<double>::infinity();
  // std::map iterates in standard lead order, so the first maximum wins ties.
  for (const auto& [lead, v] : per_lead) {
    s.mean += v;
    if (v > best) {
      best = v;
      s.best_lead = lead;
    }
  }
  s.mean /= static_cast<double>(per_lead.size());
  for (const auto& [lead, v] : per_lead) s.variance += (v - s.mean) * (v - s.mean);
  s.variance /= static_cast<double>(per_lead.size());
  return s;
}

std::map<std::string, double> group_average_score(const std::map<std::string, double>& per_instance,
                                                  const GroupingScheme& scheme) {
  std::map<std::string, std::vector<double>> group_scores;
  for (const auto& group : scheme.groups) {
    std::map<std::string, std::pair<double, std::size_t>> in_group;
    for (const auto& instance : group) {
      auto it = per_instance.find(instance);
      if (it == per_instance.end()) {
        throw Error(ErrorKind::IncompleteScores, "no score for instance '" + instance + "'");
      }
      auto& acc = in_group[split_instance(instance).first];
      acc.first += it->second;
      acc.second += 1;
    }
    for (const auto& [feature, acc] : in_group) {
      group_scores[feature].push_back(acc.first / static_cast<double>(acc.second));
    }
  }
  std::map<std::string, double> out;
  for (const auto& [feature, scores] : group_scores) {
    double sum = 0.0;
    for (double v : scores) sum += v;
    out[feature] = sum / static_cast<double>(scores.size());
  }
  return out;
}

std::string_view winner_name(Winner w) {
  switch (w) {
    case Winner::Ours: return "ours";
    case Winner::External: return "external";
    case Winner::Tie: return "tie";
    case Winner::Undefined: return "undefined";
  }
  return "undefined";
}

ComparisonReport compare_external(const FeatureTable& ours, const FeatureTable& external,
                                  const FeatureTable& truth, const std::vector<std::string>& features,
                                  const std::map<std::string, std::string>& name_map) {
  std::vector<std::string> ids;
  for (const auto& [id, row] : truth.rows) {
    if (ours.rows.count(id) && external.rows.count(id)) ids.push_back(id);
  }
  if (ids.empty()) throw Error(ErrorKind::NoOverlap, "no record id is shared by all three tables");

  ComparisonReport report;
  for (const auto& feature : features) {
    auto mapped = name_map.find(feature);
    const std::string ext_name = mapped == name_map.end() ? feature : mapped->second;
    const std::size_t tc = truth.column_or_throw(feature);
    const std::size_t oc = ours.column_or_throw(feature);
    const std::size_t ec = external.column_or_throw(ext_name);
    // Only ids where truth, ours and external are all present, so both PCCs
    // are computed on the same pairs.
    PairedSeries s_ours, s_ext;
    for (const auto& id : ids) {
      const auto& t = truth.rows.at(id)[tc];
      const auto& o = ours.rows.at(id)[oc];
      const auto& x = external.rows.at(id)[ec];
      if (!t || !o || !x) continue;
      s_ours.y_test.push_back(*t);
      s_ours.y_hat.push_back(*o);
      s_ext.y_test.push_back(*t);
      s_ext.y_hat.push_back(*x);
    }
    ComparisonRow row;
    row.feature = feature;
    row.n_pairs = s_ours.n();
    row.pcc_ours = try_pcc(s_ours);
    row.pcc_external = try_pcc(s_ext);
    if (row.pcc_ours && row.pcc_external) {
      row.winner = *row.pcc_ours > *row.pcc_external   ? Winner::Ours
                   : *row.pcc_ours < *row.pcc_external ? Winner::External
                                                       : Winner::Tie;
    } else if (row.pcc_ours) {
      row.winner = Winner::Ours;
    } else if (row.pcc_external) {
      row.winner = Winner::External;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

TopK top_k_external(const ComparisonReport& report, std::size_t k) {
  std::vector<const ComparisonRow*> ranked;
  for (const auto& r : report.rows) {
    if (r.pcc_external) ranked.push_back(&r);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto* a, const auto* b) {
    return *a->pcc_external > *b->pcc_external;
  });
  TopK out;
  out.clamped = k > ranked.size();
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) out.features.push_back(ranked[i]->feature);
  return out;
}

LeadFeatureResult make_lead_result(const std::string& feature,
                                   const std::map<LeadId, std::optional<double>>& per_lead_pcc,
                                   const std::map<LeadId, std::size_t>& per_lead_pairs) {
  LeadFeatureResult r;
  r.feature = feature;
  r.per_lead_pairs = per_lead_pairs;
  for (const auto& [lead, v] : per_lead_pcc) {
    if (v) r.per_lead_pcc[lead] = *v;
  }
  for (const auto& [lead, n] : per_lead_pairs) r.n_pairs += n;
  if (!r.per_lead_pcc.empty()) r.stats = lead_stats(r.per_lead_pcc);
  return r;
}

EvalReport build_report(const FeatureTable& truth, const FeatureTable& predicted,
                        const std::vector<std::string>& columns) {
  EvalReport report;
  std::vector<std::string> lead_order;
  std::map<std::string, std::map<LeadId, std::optional<double>>> lead_pcc;
  std::map<std::string, std::map<LeadId, std::size_t>> lead_pairs;
  for (const auto& column : columns) {
    const PairedSeries s = pair_columns(truth, column, predicted, column);
    const auto [base, lead] = split_instance(column);
    if (!lead) {
      report.global.push_back({column, try_pcc(s), s.n()});
      continue;
    }
    if (!lead_pcc.count(base)) lead_order.push_back(base);
    lead_pcc[base][*lead] = try_pcc(s);
    lead_pairs[base][*lead] = s.n();
  }
  for (const auto& base : lead_order) {
    report.lead_specific.push_back(make_lead_result(base, lead_pcc[base], lead_pairs[base]));
  }
  return report;
}

}  // namespace ecgx
