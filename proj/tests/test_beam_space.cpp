#include "beamopt/beam_space.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace beamopt;

namespace {

const SolutionSpace k40{40, 4, 2};

// Independent oracle: every vector in [-m, m]^k, filtered by re-checking the
// validity rules directly.
std::vector<ActionVec> brute_force_actions(const std::vector<int>& s, int K, int m) {
  const int k = static_cast<int>(s.size());
  std::vector<ActionVec> out;
  std::vector<int> a(k, -m);
  while (true) {
    bool zero = true;
    std::set<int> seen;
    bool ok = true;
    for (int i = 0; i < k; ++i) {
      zero = zero && a[i] == 0;
      const int v = s[i] + a[i];
      if (v < 1 || v > K || !seen.insert(v).second) ok = false;
    }
    if (ok && !zero) out.push_back(a);
    int i = k - 1;
    while (i >= 0 && a[i] == m) a[i--] = -m;
    if (i < 0) break;
    ++a[i];
  }
  return out;
}

}  // namespace

TEST(BeamConfig, AcceptsEquidistantBaseline) {
  const BeamConfig s = make_config({5, 7, 9, 11}, k40);
  EXPECT_EQ(s.ids(), (std::vector<int>{5, 7, 9, 11}));
}

TEST(BeamConfig, AcceptsMinimalConfig) {
  EXPECT_NO_THROW(make_config({1, 2, 3, 4}, k40));
}

TEST(BeamConfig, RejectsDuplicates) {
  EXPECT_THROW(make_config({5, 5, 9, 11}, k40), InvalidConfig);
}

TEST(BeamConfig, RejectsRangeAndLength) {
  EXPECT_THROW(make_config({0, 5, 9, 11}, k40), InvalidConfig);
  EXPECT_THROW(make_config({5, 9, 11, 41}, k40), InvalidConfig);
  EXPECT_THROW(make_config({5, 9, 11}, k40), InvalidConfig);
  EXPECT_FALSE(try_make_config({5, 9, 11}, k40).has_value());
}

TEST(BeamConfig, SortsInput) {
  EXPECT_EQ(make_config({11, 5, 9, 7}, k40).ids(), (std::vector<int>{5, 7, 9, 11}));
}

TEST(SolutionSpace, Validation) {
  EXPECT_THROW((SolutionSpace{4, 4, 1}.validate()), std::invalid_argument);
  EXPECT_THROW((SolutionSpace{5, 0, 1}.validate()), std::invalid_argument);
  EXPECT_THROW((SolutionSpace{5, 2, 0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((SolutionSpace{2, 1, 1}.validate()));
}

TEST(ApplyAction, Arithmetic) {
  const auto r = apply_action(make_config({5, 7, 9, 11}, k40), {2, 1, 0, -1}, k40);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->ids(), (std::vector<int>{7, 8, 9, 10}));
}

TEST(ApplyAction, BelowRange) {
  EXPECT_FALSE(apply_action(make_config({1, 6, 19, 40}, k40), {-1, 0, 0, 0}, k40));
}

TEST(ApplyAction, CollisionAndSwap) {
  const BeamConfig s = make_config({3, 4, 10, 12}, k40);
  EXPECT_FALSE(apply_action(s, {1, 0, 0, 0}, k40));
  const auto swapped = apply_action(s, {1, -1, 0, 0}, k40);
  ASSERT_TRUE(swapped);
  EXPECT_EQ(*swapped, s);
}

TEST(ApplyAction, MalformedActions) {
  const BeamConfig s = make_config({5, 7, 9, 11}, k40);
  EXPECT_FALSE(apply_action(s, {0, 0, 0, 0}, k40));
  EXPECT_FALSE(apply_action(s, {3, 0, 0, 0}, k40));
  EXPECT_FALSE(apply_action(s, {1, 0, 0}, k40));
}

TEST(EnumerateActions, SingleActionCorner) {
  const SolutionSpace sp{5, 4, 1};
  const auto acts = enumerate_valid_actions(make_config({1, 2, 3, 4}, sp), sp);
  EXPECT_EQ(acts, brute_force_actions({1, 2, 3, 4}, 5, 1));
  // Re-sorting admits permutations and multi-beam shifts besides [0,0,0,1].
  EXPECT_EQ(acts.size(), 11u);
  const ActionVec last_up{0, 0, 0, 1};
  ASSERT_NE(std::find(acts.begin(), acts.end(), last_up), acts.end());
  EXPECT_EQ(apply_action(make_config({1, 2, 3, 4}, sp), last_up, sp)->ids(),
            (std::vector<int>{1, 2, 3, 5}));
}

TEST(EnumerateActions, MatchesBruteForce) {
  for (const auto& ids : std::vector<std::vector<int>>{
           {20, 21, 22, 23}, {1, 6, 19, 40}, {5, 7, 9, 11}, {1, 2, 39, 40}}) {
    const auto acts = enumerate_valid_actions(make_config(ids, k40), k40);
    EXPECT_EQ(acts, brute_force_actions(ids, 40, 2)) << canonical_key(make_config(ids, k40));
    for (const auto& a : acts) {
      EXPECT_NE(a, ActionVec(4, 0));
    }
  }
}

TEST(Enumeration, Counts) {
  EXPECT_EQ(binomial(40, 4), 91390u);
  EXPECT_EQ(binomial(5, 4), 5u);
  EXPECT_EQ(binomial(12, 3), 220u);
  EXPECT_EQ(binomial(3, 5), 0u);
  EXPECT_EQ(binomial(200, 100), UINT64_MAX);

  ConfigEnumerator it(SolutionSpace{12, 3, 2});
  EXPECT_EQ(it.total(), 220u);
  BeamConfig s, prev;
  int n = 0;
  while (it.next(s)) {
    if (n) {
      EXPECT_LT(prev, s);
    }
    prev = s;
    ++n;
  }
  EXPECT_EQ(n, 220);
}

TEST(Enumeration, CapRejectsLargeSpaces) {
  EXPECT_THROW(ConfigEnumerator(k40, 1000), CapExceeded);
}

TEST(Enumeration, UnrankMatchesOrder) {
  const SolutionSpace sp{9, 3, 1};
  std::uint64_t r = 0;
  for_each_config(sp, [&](const BeamConfig& s) { EXPECT_EQ(unrank_config(r++, sp), s); });
  EXPECT_EQ(r, binomial(9, 3));
}

TEST(CanonicalKey, Format) {
  EXPECT_EQ(canonical_key(make_config({7, 8, 9, 10}, k40)), "7-8-9-10");
  EXPECT_EQ(canonical_key(make_config({5, 7, 9, 11}, k40)),
            canonical_key(make_config({11, 9, 7, 5}, k40)));
  EXPECT_NE(canonical_key(make_config({5, 7, 9, 11}, k40)),
            canonical_key(make_config({5, 7, 9, 12}, k40)));
  EXPECT_EQ(parse_key("7-8-9-10", k40), make_config({7, 8, 9, 10}, k40));
  EXPECT_THROW(parse_key("7-8-x-10", k40), InvalidConfig);
}

TEST(Equidistant, SpreadsEvenly) {
  EXPECT_EQ(equidistant_config(SolutionSpace{16, 4, 2}, 1, 16).ids(),
            (std::vector<int>{1, 6, 11, 16}));
  EXPECT_EQ(equidistant_config(k40, 5, 11).ids(), (std::vector<int>{5, 7, 9, 11}));
}
