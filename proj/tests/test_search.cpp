#include "beamopt/search.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace beamopt;

namespace {

// Smooth synthetic landscape peaked at `peak`, plus a deterministic
// per-config ripple so that values are distinct.
class SyntheticEnv : public Environment {
 public:
  explicit SyntheticEnv(std::vector<double> peak) : peak_(std::move(peak)) {}
  double value(const BeamConfig& s) override {
    ++calls;
    double d2 = 0, ripple = 0;
    for (int i = 0; i < s.size(); ++i) {
      d2 += (s[i] - peak_[i]) * (s[i] - peak_[i]);
      ripple += std::sin(1.7 * s[i] * (i + 1));
    }
    return std::clamp(0.9 * std::exp(-d2 / 30.0) + 0.01 * ripple + 0.05, 0.0, 1.0);
  }
  std::string descriptor() const override { return "synthetic"; }
  int calls = 0;

 private:
  std::vector<double> peak_;
};

class ConstantEnv : public Environment {
 public:
  double value(const BeamConfig&) override { return 0.5; }
  std::string descriptor() const override { return "constant"; }
};

class FailingEnv : public Environment {
 public:
  double value(const BeamConfig& s) override {
    if (s[0] == 1) throw std::runtime_error("boom");
    return 2.0;
  }
  std::string descriptor() const override { return "failing"; }
};

const SolutionSpace k12{12, 3, 2};

SearchParams fast_params(int T, std::uint64_t seed) {
  SearchParams p;
  p.budget = T;
  p.seed = seed;
  p.predictor.hidden = {32, 16};
  return p;
}

std::multiset<std::string> visited_keys(const SearchResult& r) {
  std::multiset<std::string> keys;
  for (const auto& h : r.history) {
    if (h.evaluated) keys.insert(canonical_key(h.config));
  }
  return keys;
}

}  // namespace

TEST(RandomSearch, DeterministicAndDistinct) {
  SyntheticEnv env({3, 6, 9});
  const SearchResult a = random_search(env, k12, 50, 4);
  const SearchResult b = random_search(env, k12, 50, 4);
  ASSERT_EQ(a.history.size(), 50u);
  std::set<std::string> keys;
  for (size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].config, b.history[i].config);
    keys.insert(canonical_key(a.history[i].config));
  }
  EXPECT_EQ(keys.size(), 50u);
  EXPECT_EQ(a.env_calls, 50);
}

TEST(RandomSearch, FullBudgetFindsGlobalOptimum) {
  SyntheticEnv env({3, 6, 9});
  const ExhaustiveTable t = exhaustive_search(env, k12);
  const SearchResult r = random_search(env, k12, 220, 1);
  EXPECT_EQ(r.best_value, t.max_value());
  EXPECT_EQ(r.best, t.configs[t.argmax]);
}

TEST(RandomSearch, BestIsMonotoneInPrefix) {
  SyntheticEnv env({2, 7, 11});
  double prev = -1;
  for (int T = 1; T <= 60; T += 7) {
    const double best = random_search(env, k12, T, 9).best_value;
    EXPECT_GE(best, prev);
    prev = best;
  }
}

TEST(RandomSearch, BudgetAboveSpaceRejectedBeforeEvaluation) {
  SyntheticEnv env({3, 6, 9});
  EXPECT_THROW(random_search(env, k12, 221, 1), BudgetError);
  EXPECT_EQ(env.calls, 0);
}

TEST(Exhaustive, TableSizeAndDominance) {
  SyntheticEnv env({4, 5, 10});
  const ExhaustiveTable t = exhaustive_search(env, k12);
  ASSERT_EQ(t.configs.size(), 220u);
  EXPECT_EQ(t.values.size(), 220u);
  EXPECT_EQ(t.max_value(), *std::max_element(t.values.begin(), t.values.end()));
  EXPECT_GE(t.max_value(), random_search(env, k12, 40, 2).best_value);
  EXPECT_GE(t.max_value(), epsilon_greedy_search(env, k12, fast_params(30, 2),
                                                 BeamIdFeatureProvider(3))
                               .best_value);
  EXPECT_EQ(fraction_better(t, t.max_value()), 0.0);
}

TEST(Exhaustive, CapExceeded) {
  SyntheticEnv env({1, 2, 3, 4});
  EXPECT_THROW(exhaustive_search(env, SolutionSpace{40, 4, 2}, 1000), CapExceeded);
  EXPECT_EQ(env.calls, 0);
}

TEST(EpsilonGreedy, EpsilonOneEqualsRandomSearch) {
  SyntheticEnv env({3, 6, 9});
  for (std::uint64_t seed : {0u, 1u, 17u}) {
    SearchParams p = fast_params(40, seed);
    p.epsilon = 1.0;
    const SearchResult g = epsilon_greedy_search(env, k12, p, BeamIdFeatureProvider(3));
    const SearchResult r = random_search(env, k12, 40, seed);
    EXPECT_EQ(visited_keys(g), visited_keys(r));
  }
}

TEST(EpsilonGreedy, BudgetIsExact) {
  SyntheticEnv env({3, 6, 9});
  const SearchResult r = epsilon_greedy_search(env, k12, fast_params(35, 3),
                                               BeamIdFeatureProvider(3));
  EXPECT_EQ(r.env_calls, 35);
  EXPECT_EQ(env.calls, 35);
  EXPECT_EQ(static_cast<int>(visited_keys(r).size()), 35);
  EXPECT_EQ(r.trainings, 35 - 10 + 1);
  for (size_t i = 1; i < r.history.size(); ++i) {
    EXPECT_GT(r.history[i].step, r.history[i - 1].step);
    EXPECT_GE(r.history[i].value, 0.0);
    EXPECT_LE(r.history[i].value, 1.0);
  }
  ASSERT_EQ(r.rewards.size(), r.history.size() - 1);
  for (size_t t = 0; t < r.rewards.size(); ++t) {
    EXPECT_EQ(r.rewards[t], r.history[t + 1].value - r.history[t].value);
  }
}

TEST(EpsilonGreedy, WarmStartOnlyBoundary) {
  SyntheticEnv env({3, 6, 9});
  SearchParams p = fast_params(10, 5);
  const SearchResult r = epsilon_greedy_search(env, k12, p, BeamIdFeatureProvider(3));
  EXPECT_EQ(r.trainings, 1);
  ASSERT_EQ(r.history.size(), 10u);
  double best = -1;
  for (const auto& h : r.history) best = std::max(best, h.value);
  EXPECT_EQ(r.best_value, best);
}

TEST(EpsilonGreedy, TiesPreferEarliest) {
  ConstantEnv env;
  SearchParams p = fast_params(15, 6);
  const SearchResult r = epsilon_greedy_search(env, k12, p, BeamIdFeatureProvider(3));
  EXPECT_EQ(r.best, r.history.front().config);
}

TEST(EpsilonGreedy, Deterministic) {
  SyntheticEnv env({3, 6, 9});
  const auto a = epsilon_greedy_search(env, k12, fast_params(30, 8), BeamIdFeatureProvider(3));
  const auto b = epsilon_greedy_search(env, k12, fast_params(30, 8), BeamIdFeatureProvider(3));
  ASSERT_EQ(a.history.size(), b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].config, b.history[i].config);
    EXPECT_EQ(a.history[i].action, b.history[i].action);
  }
}

TEST(EpsilonGreedy, RandomActionExploration) {
  SyntheticEnv env({3, 6, 9});
  SearchParams p = fast_params(25, 2);
  p.epsilon = 0.5;
  p.exploration = Exploration::kRandomAction;
  const auto r = epsilon_greedy_search(env, k12, p, BeamIdFeatureProvider(3));
  EXPECT_EQ(r.env_calls, 25);
  for (const auto& h : r.history) {
    if (h.kind == StepKind::kExplore) {
      EXPECT_EQ(h.action.size(), 3u);
    }
  }
}

TEST(EpsilonGreedy, InvalidParams) {
  SyntheticEnv env({3, 6, 9});
  SearchParams p = fast_params(5, 1);
  EXPECT_THROW(epsilon_greedy_search(env, k12, p, BeamIdFeatureProvider(3)),
               std::invalid_argument);
  p = fast_params(300, 1);
  EXPECT_THROW(epsilon_greedy_search(env, k12, p, BeamIdFeatureProvider(3)), BudgetError);
  p = fast_params(30, 1);
  p.epsilon = 1.5;
  EXPECT_THROW(epsilon_greedy_search(env, k12, p, BeamIdFeatureProvider(3)),
               std::invalid_argument);
  EXPECT_EQ(env.calls, 0);
}

TEST(EpsilonGreedy, EnvironmentFailureCarriesConfig) {
  FailingEnv env;
  try {
    random_search(env, SolutionSpace{6, 2, 1}, 15, 0);
    FAIL() << "expected an EnvironmentError";
  } catch (const EnvironmentError& e) {
    EXPECT_FALSE(e.config_key().empty());
  }
}

TEST(EpsilonGreedy, SyntheticTopFivePercent) {
  SyntheticEnv env({3, 6, 9});
  const ExhaustiveTable t = exhaustive_search(env, k12);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SearchParams p = fast_params(60, seed);
    const auto r = epsilon_greedy_search(env, k12, p, BeamIdFeatureProvider(3));
    if (fraction_better(t, r.best_value) < 0.05) ++hits;
  }
  EXPECT_GE(hits, 8);
}

TEST(GetBestAction, HandCraftedPredictorPicksArgmax) {
  // Linear score on the sum of beam IDs: the all-(+2) action is the unique
  // maximum at sigmoid(2.2) ~ 0.9, every other successor scores <= 0.06.
  const SolutionSpace sp{40, 4, 2};
  const BeamConfig s = make_config({5, 7, 9, 11}, sp);
  const double alpha = 5.0, top_sum = 5 + 7 + 9 + 11 + 8;
  DenseLayer out{Eigen::MatrixXd::Constant(1, 4, alpha), Eigen::VectorXd::Constant(1, 2.2 - alpha * top_sum)};
  ValuePredictor pred(Network({out}), NormStats{{0, 0, 0, 0}, {1, 1, 1, 1}});
  std::mt19937_64 rng(1);
  long predictions = 0;
  const ActionVec a = get_best_action(s, pred, sp, BeamIdFeatureProvider(4), rng, &predictions);
  EXPECT_EQ(a, (ActionVec{2, 2, 2, 2}));
  EXPECT_NEAR(pred.predict(beam_id_encoding(*apply_action(s, a, sp))), 0.9, 0.01);
  EXPECT_EQ(predictions, static_cast<long>(enumerate_valid_actions(s, sp).size()));
}

TEST(GetBestAction, ConstantPredictorIsUniform) {
  const SolutionSpace sp{8, 2, 1};
  const BeamConfig s = make_config({3, 6}, sp);
  DenseLayer out{Eigen::MatrixXd::Zero(1, 2), Eigen::VectorXd::Zero(1)};
  ValuePredictor pred(Network({out}), NormStats{{0, 0}, {1, 1}});
  const auto actions = enumerate_valid_actions(s, sp);
  std::map<ActionVec, int> counts;
  std::mt19937_64 rng(3);
  const int draws = 800;
  for (int i = 0; i < draws; ++i) {
    ++counts[get_best_action(s, pred, sp, BeamIdFeatureProvider(2), rng)];
  }
  EXPECT_EQ(counts.size(), actions.size());
  const double expected = static_cast<double>(draws) / actions.size();
  for (const auto& [a, n] : counts) {
    EXPECT_GT(n, expected * 0.5);
    EXPECT_LT(n, expected * 1.5);
  }
}

TEST(GetBestAction, SmallestValidSpaceHasActions) {
  // K > k is required, which guarantees at least one valid action.
  EXPECT_THROW(SolutionSpace({2, 2, 1}).validate(), std::invalid_argument);
  const SolutionSpace ok{3, 2, 1};
  DenseLayer out{Eigen::MatrixXd::Zero(1, 2), Eigen::VectorXd::Zero(1)};
  ValuePredictor pred(Network({out}), NormStats{{0, 0}, {1, 1}});
  std::mt19937_64 rng(0);
  EXPECT_NO_THROW(get_best_action(make_config({1, 3}, ok), pred, ok, BeamIdFeatureProvider(2), rng));
}
