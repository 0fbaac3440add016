#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ecgx/ecg_io.hpp"

namespace ecgx {

enum class GroupingKind { RandomPairs, SemanticPairs, SemanticClusters, LeadInstanceGroups, Custom };

std::string_view grouping_kind_name(GroupingKind kind);

struct GroupingScheme {
  std::string name;
  GroupingKind kind = GroupingKind::Custom;
  std::vector<std::vector<std::string>> groups;
  std::vector<std::string> group_names;  // optional labels, parallel to groups

  std::vector<std::string> universe() const;
  // Throws ConfigError unless groups are non-empty and disjoint, and pair
  // kinds have exactly two members per group.
  void validate() const;
};

// The sixteen PTB-XL+ global features, in the order of the single-feature
// results table.
const std::vector<std::string>& global_features();

// Seeded uniform shuffle, then consecutive pairs. Throws OddFeatureCount.
GroupingScheme random_pairs(const std::vector<std::string>& features, std::uint64_t seed);

// The published random pairing, kept verbatim for reproduction runs.
GroupingScheme reported_random_pairs();
GroupingScheme semantic_pairs();
GroupingScheme semantic_clusters();

// The twelve per-lead instances of `feature` (columns <feature>_<lead>)
// partitioned into 12 / group_size groups after a seeded shuffle.
// Throws InvalidGroupSize unless group_size divides 12.
GroupingScheme lead_instance_groups(const std::string& feature, std::size_t group_size,
                                    std::uint64_t seed);

GroupingScheme custom_scheme(std::string name, std::vector<std::vector<std::string>> groups);

// Keeps only the groups whose members are all in `available`.
GroupingScheme restrict_scheme(const GroupingScheme& scheme, const std::vector<std::string>& available);

// Splits an instance column such as "R_Amp_V5" into ("R_Amp", V5); plain
// feature names return (name, nullopt).
std::pair<std::string, std::optional<LeadId>> split_instance(const std::string& column);

nlohmann::json to_json(const GroupingScheme& scheme);
GroupingScheme scheme_from_json(const nlohmann::json& j);

}  // namespace ecgx
