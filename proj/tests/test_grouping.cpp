#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ecgx/error.hpp"
#include "ecgx/grouping.hpp"
#include "ecgx/random.hpp"

using namespace ecgx;

namespace {

using Groups = std::vector<std::vector<std::string>>;

bool is_partition(const GroupingScheme& s, const std::vector<std::string>& universe) {
  std::multiset<std::string> seen;
  for (const auto& g : s.groups) seen.insert(g.begin(), g.end());
  if (seen.size() != universe.size()) return false;
  for (const auto& f : universe) {
    if (seen.count(f) != 1) return false;
  }
  return true;
}

std::vector<std::string> lead_columns(const std::string& feature) {
  std::vector<std::string> out;
  for (auto lead : kAllLeads) out.push_back(feature + "_" + std::string(lead_name(lead)));
  return out;
}

}  // namespace

TEST_SUITE("grouping") {
  TEST_CASE("published random and semantic pairs, verbatim") {
    const Groups random = {{"RR_Mean", "QT_IntFridericia"}, {"QRS_Off", "QT_IntCorr"},
                           {"T_On", "P_AxisFront"},         {"QT_IntBazett", "QRS_On"},
                           {"QT_IntFramingham", "P_Off"},   {"PR_Int", "QT_Int"},
                           {"HR_Ventr", "P_On"},            {"QRS_Dur", "T_Off"}};
    const Groups semantic = {{"QT_IntFramingham", "QT_IntBazett"}, {"QT_Int", "QT_IntCorr"},
                             {"QRS_On", "QRS_Off"},                {"P_On", "P_Off"},
                             {"T_On", "T_Off"},                    {"RR_Mean", "HR_Ventr"},
                             {"QRS_Dur", "PR_Int"},                {"P_AxisFront", "QT_IntFridericia"}};
    CHECK(reported_random_pairs().groups == random);
    CHECK(semantic_pairs().groups == semantic);
    CHECK(semantic_pairs().groups[4] == std::vector<std::string>{"T_On", "T_Off"});
    CHECK(is_partition(semantic_pairs(), global_features()));
    CHECK(is_partition(reported_random_pairs(), global_features()));
  }

  TEST_CASE("published semantic clusters, verbatim") {
    const auto s = semantic_clusters();
    const Groups expected = {
        {"QT_Int", "QT_IntCorr", "QT_IntBazett", "QT_IntFramingham", "QT_IntFridericia"},
        {"QRS_On", "QRS_Off", "QRS_Dur"},
        {"P_On", "P_Off", "P_AxisFront"},
        {"T_On", "T_Off"},
        {"RR_Mean", "HR_Ventr", "PR_Int"}};
    CHECK(s.groups == expected);
    CHECK(s.group_names == std::vector<std::string>{"QT Interval–Related", "QRS Complex Timing",
                                                    "P Wave Timing", "T Wave Timing",
                                                    "Heart Rate & Interval"});
    CHECK(is_partition(s, global_features()));
    CHECK(global_features().size() == 16);
  }

  TEST_CASE("random pairs partition their input and depend on the seed") {
    const auto& f = global_features();
    std::set<Groups> distinct;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto s = random_pairs(f, seed);
      CHECK(s.groups.size() == 8);
      for (const auto& g : s.groups) CHECK(g.size() == 2);
      CHECK(is_partition(s, f));
      CHECK(random_pairs(f, seed).groups == s.groups);
      CHECK_NOTHROW(s.validate());
      distinct.insert(s.groups);
    }
    CHECK(distinct.size() > 1);

    auto odd = f;
    odd.pop_back();
    try {
      random_pairs(odd, 1);
      FAIL("expected OddFeatureCount");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::OddFeatureCount);
    }
  }

  TEST_CASE("random pairing is uniform over partners") {
    // Each feature should meet each of the other 15 about equally often.
    const auto& f = global_features();
    std::map<std::pair<std::string, std::string>, int> count;
    const int trials = 3000;
    for (int seed = 0; seed < trials; ++seed) {
      for (const auto& g : random_pairs(f, static_cast<std::uint64_t>(seed)).groups) {
        count[std::minmax(g[0], g[1])]++;
      }
    }
    CHECK(count.size() == 16 * 15 / 2);
    const double expected = trials / 15.0;
    for (const auto& [pair, c] : count) {
      CHECK(std::abs(c - expected) < 5.0 * std::sqrt(expected));
    }
  }

  TEST_CASE("lead instance groups") {
    for (std::size_t size : {2u, 3u, 4u, 6u, 12u}) {
      const auto s = lead_instance_groups("R_Amp", size, 7);
      CHECK(s.groups.size() == 12 / size);
      for (const auto& g : s.groups) CHECK(g.size() == size);
      CHECK(is_partition(s, lead_columns("R_Amp")));
      CHECK(lead_instance_groups("R_Amp", size, 7).groups == s.groups);
    }
    auto all = lead_instance_groups("T_Amp", 12, 1).groups[0];
    std::sort(all.begin(), all.end());
    auto cols = lead_columns("T_Amp");
    std::sort(cols.begin(), cols.end());
    CHECK(all == cols);
    for (std::size_t bad : {0u, 5u, 7u, 24u}) {
      try {
        lead_instance_groups("R_Amp", bad, 1);
        FAIL("expected InvalidGroupSize");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidGroupSize);
      }
    }
  }

  TEST_CASE("instance names, restriction, validation and json") {
    CHECK(split_instance("R_Amp_V5") == std::pair<std::string, std::optional<LeadId>>{"R_Amp", LeadId::V5});
    CHECK(split_instance("QRS_AmpPP_aVR").second == LeadId::aVR);
    CHECK(split_instance("RR_Mean").first == "RR_Mean");
    CHECK_FALSE(split_instance("RR_Mean").second.has_value());
    CHECK_FALSE(split_instance("QT_Int").second.has_value());

    const auto r = restrict_scheme(semantic_pairs(), {"RR_Mean", "HR_Ventr", "T_On", "T_Off", "QRS_Dur"});
    CHECK(r.groups == Groups{{"T_On", "T_Off"}, {"RR_Mean", "HR_Ventr"}});

    CHECK_THROWS_AS(custom_scheme("x", {{"a", "b"}, {"b", "c"}}).validate(), Error);
    CHECK_THROWS_AS(custom_scheme("x", {{}}).validate(), Error);
    GroupingScheme bad_pairs = semantic_pairs();
    bad_pairs.groups[0].push_back("Extra");
    CHECK_THROWS_AS(bad_pairs.validate(), Error);

    for (const auto& s : {semantic_pairs(), semantic_clusters(), lead_instance_groups("R_Amp", 3, 2),
                          custom_scheme("mine", {{"a"}, {"b", "c"}})}) {
      const auto back = scheme_from_json(to_json(s));
      CHECK(back.name == s.name);
      CHECK(back.kind == s.kind);
      CHECK(back.groups == s.groups);
      CHECK(back.group_names == s.group_names);
    }
  }
}
