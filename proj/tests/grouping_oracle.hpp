#pragma once

#include <map>
#include <set>
#include <string>

#include "ecgx/grouping.hpp"
#include "ecgx/random.hpp"

namespace ecgx::test {

// Feature-first recomputation of the two-stage group average.
inline std::map<std::string, double> brute_force_group_average(
    const std::map<std::string, double>& per_instance, const GroupingScheme& scheme) {
  std::set<std::string> features;
  for (const auto& g : scheme.groups) {
    for (const auto& m : g) features.insert(split_instance(m).first);
  }
  std::map<std::string, double> out;
  for (const auto& f : features) {
    double group_sum = 0.0;
    int n_groups = 0;
    for (const auto& g : scheme.groups) {
      double s = 0.0;
      int n = 0;
      for (const auto& m : g) {
        if (split_instance(m).first != f) continue;
        s += per_instance.at(m);
        ++n;
      }
      if (n == 0) continue;
      group_sum += s / n;
      ++n_groups;
    }
    out[f] = group_sum / n_groups;
  }
  return out;
}

// Random scheme over lead instances of a few features plus some plain
// features, with overlapping membership of base features across groups.
struct GroupFixture {
  GroupingScheme scheme;
  std::map<std::string, double> scores;
};

inline GroupFixture random_group_fixture(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> members;
  for (const char* f : {"R_Amp", "S_Amp", "T_Amp"}) {
    for (auto lead : kAllLeads) {
      if (rng.uniform() < 0.7) members.push_back(std::string(f) + "_" + std::string(lead_name(lead)));
    }
  }
  for (const char* f : {"RR_Mean", "QT_Int", "P_On"}) members.push_back(f);
  rng.shuffle(members);
  GroupFixture fx;
  std::vector<std::vector<std::string>> groups;
  std::size_t i = 0;
  while (i < members.size()) {
    const std::size_t size = std::min<std::size_t>(members.size() - i, 1 + rng.below(5));
    groups.emplace_back(members.begin() + static_cast<long>(i), members.begin() + static_cast<long>(i + size));
    i += size;
  }
  fx.scheme = custom_scheme("fixture", groups);
  for (const auto& m : members) fx.scores[m] = rng.uniform(-1.0, 1.0);
  return fx;
}

}  // namespace ecgx::test
