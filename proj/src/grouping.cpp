#include "ecgx/grouping.hpp"

#include <algorithm>
#include <set>

#include "ecgx/error.hpp"
#include "ecgx/random.hpp"

namespace ecgx {

std::string_view grouping_kind_name(GroupingKind kind) {
  switch (kind) {
    case GroupingKind::RandomPairs: return "RANDOM_PAIRS";
    case GroupingKind::SemanticPairs: return "SEMANTIC_PAIRS";
    case GroupingKind::SemanticClusters: return "SEMANTIC_CLUSTERS";
    case GroupingKind::LeadInstanceGroups: return "LEAD_INSTANCE_GROUPS";
    case GroupingKind::Custom: return "CUSTOM";
  }
  return "CUSTOM";
}

namespace {

GroupingKind parse_kind(const std::string& s) {
  for (auto k : {GroupingKind::RandomPairs, GroupingKind::SemanticPairs,
                 GroupingKind::SemanticClusters, GroupingKind::LeadInstanceGroups,
                 GroupingKind::Custom}) {
    if (grouping_kind_name(k) == s) return k;
  }
  throw Error(ErrorKind::ConfigError, "unknown grouping kind '" + s + "'");
}

}  // namespace

std::vector<std::string> GroupingScheme::universe() const {
  std::vector<std::string> out;
  for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

void GroupingScheme::validate() const {
  std::set<std::string> seen;
  for (const auto& g : groups) {
    if (g.empty()) throw Error(ErrorKind::ConfigError, name + ": empty group");
    if ((kind == GroupingKind::RandomPairs || kind == GroupingKind::SemanticPairs) && g.size() != 2) {
      throw Error(ErrorKind::ConfigError, name + ": pair schemes need exactly two features per group");
    }
    for (const auto& f : g) {
      if (!seen.insert(f).second) {
        throw Error(ErrorKind::ConfigError, name + ": feature '" + f + "' appears in two groups");
      }
    }
  }
  if (!group_names.empty() && group_names.size() != groups.size()) {
    throw Error(ErrorKind::ConfigError, name + ": group name count does not match group count");
  }
}

const std::vector<std::string>& global_features() {
  static const std::vector<std::string> names = {
      "T_Off",           "QRS_Off",     "HR_Ventr", "QRS_On",           "RR_Mean",
      "QT_IntFramingham", "QT_IntFridericia", "QT_Int", "QT_IntBazett", "T_On",
      "QT_IntCorr",      "P_Off",       "QRS_Dur",  "P_On",             "PR_Int",
      "P_AxisFront"};
  return names;
}

GroupingScheme random_pairs(const std::vector<std::string>& features, std::uint64_t seed) {
  if (features.size() % 2 != 0) {
    throw Error(ErrorKind::OddFeatureCount,
                "cannot pair " + std::to_string(features.size()) + " features");
  }
  std::vector<std::string> order = features;
  Rng rng(derive_seed(seed, 0x6A11u));
  rng.shuffle(order);
  GroupingScheme s;
  s.name = "random_pairs_seed" + std::to_string(seed);
  s.kind = GroupingKind::RandomPairs;
  for (std::size_t i = 0; i < order.size(); i += 2) s.groups.push_back({order[i], order[i + 1]});
  s.validate();
  return s;
}

GroupingScheme reported_random_pairs() {
  GroupingScheme s;
  s.name = "reported_random_pairs";
  s.kind = GroupingKind::RandomPairs;
  s.groups = {{"RR_Mean", "QT_IntFridericia"}, {"QRS_Off", "QT_IntCorr"},
              {"T_On", "P_AxisFront"},         {"QT_IntBazett", "QRS_On"},
              {"QT_IntFramingham", "P_Off"},   {"PR_Int", "QT_Int"},
              {"HR_Ventr", "P_On"},            {"QRS_Dur", "T_Off"}};
  return s;
}

GroupingScheme semantic_pairs() {
  GroupingScheme s;
  s.name = "semantic_pairs";
  s.kind = GroupingKind::SemanticPairs;
  s.groups = {{"QT_IntFramingham", "QT_IntBazett"}, {"QT_Int", "QT_IntCorr"},
              {"QRS_On", "QRS_Off"},                {"P_On", "P_Off"},
              {"T_On", "T_Off"},                    {"RR_Mean", "HR_Ventr"},
              {"QRS_Dur", "PR_Int"},                {"P_AxisFront", "QT_IntFridericia"}};
  return s;
}

GroupingScheme semantic_clusters() {
  GroupingScheme s;
  s.name = "semantic_clusters";
  s.kind = GroupingKind::SemanticClusters;
  s.group_names = {"QT Interval–Related", "QRS Complex Timing", "P Wave Timing",
                   "T Wave Timing", "Heart Rate & Interval"};
  s.groups = {{"QT_Int", "QT_IntCorr", "QT_IntBazett", "QT_IntFramingham", "QT_IntFridericia"},
              {"QRS_On", "QRS_Off", "QRS_Dur"},
              {"P_On", "P_Off", "P_AxisFront"},
              {"T_On", "T_Off"},
              {"RR_Mean", "HR_Ventr", "PR_Int"}};
  return s;
}

GroupingScheme lead_instance_groups(const std::string& feature, std::size_t group_size,
                                    std::uint64_t seed) {
  if (group_size == 0 || kNumLeads % group_size != 0) {
    throw Error(ErrorKind::InvalidGroupSize,
                "group size " + std::to_string(group_size) + " does not divide 12");
  }
  std::vector<std::string> instances;
  for (auto lead : kAllLeads) instances.push_back(feature + "_" + std::string(lead_name(lead)));
  Rng rng(derive_seed(seed, 0x1EADu));
  rng.shuffle(instances);
  GroupingScheme s;
  s.name = feature + "_groups_of_" + std::to_string(group_size);
  s.kind = GroupingKind::LeadInstanceGroups;
  for (std::size_t i = 0; i < instances.size(); i += group_size) {
    s.groups.emplace_back(instances.begin() + static_cast<std::ptrdiff_t>(i),
                          instances.begin() + static_cast<std::ptrdiff_t>(i + group_size));
  }
  return s;
}

GroupingScheme custom_scheme(std::string name, std::vector<std::vector<std::string>> groups) {
  GroupingScheme s;
  s.name = std::move(name);
  s.kind = GroupingKind::Custom;
  s.groups = std::move(groups);
  s.validate();
  return s;
}

GroupingScheme restrict_scheme(const GroupingScheme& scheme,
                               const std::vector<std::string>& available) {
  GroupingScheme out;
  out.name = scheme.name;
  out.kind = scheme.kind;
  for (std::size_t i = 0; i < scheme.groups.size(); ++i) {
    const auto& g = scheme.groups[i];
    const bool all = std::all_of(g.begin(), g.end(), [&](const std::string& f) {
      return std::find(available.begin(), available.end(), f) != available.end();
    });
    if (!all) continue;
    out.groups.push_back(g);
    if (!scheme.group_names.empty()) out.group_names.push_back(scheme.group_names[i]);
  }
  return out;
}

std::pair<std::string, std::optional<LeadId>> split_instance(const std::string& column) {
  const auto pos = column.rfind('_');
  if (pos != std::string::npos && pos > 0) {
    // Exact-case match only, so names like "P_i" stay plain features.
    const auto suffix = std::string_view(column).substr(pos + 1);
    for (auto lead : kAllLeads) {
      if (lead_name(lead) == suffix) return {column.substr(0, pos), lead};
    }
  }
  return {column, std::nullopt};
}

nlohmann::json to_json(const GroupingScheme& scheme) {
  nlohmann::json j;
  j["name"] = scheme.name;
  j["kind"] = grouping_kind_name(scheme.kind);
  j["groups"] = scheme.groups;
  if (!scheme.group_names.empty()) j["group_names"] = scheme.group_names;
  return j;
}

GroupingScheme scheme_from_json(const nlohmann::json& j) {
  try {
    GroupingScheme s;
    s.name = j.at("name").get<std::string>();
    s.kind = parse_kind(j.at("kind").get<std::string>());
    s.groups = j.at("groups").get<std::vector<std::vector<std::string>>>();
    if (j.contains("group_names")) s.group_names = j["group_names"].get<std::vector<std::string>>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("bad grouping scheme: ") + e.what());
  }
}

}  // namespace ecgx
