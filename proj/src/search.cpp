#include "beamopt/search.hpp"

#include "beamopt/seed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace beamopt {

namespace {

constexpr std::uint64_t kPolicyStream = 1;
constexpr std::uint64_t kPredictorStream = 2;

double evaluate(Environment& env, const BeamConfig& s) {
  const std::string key = canonical_key(s);
  double v;
  try {
    v = env.value(s);
  } catch (const EnvironmentError&) {
    throw;
  } catch (const std::exception& e) {
    throw EnvironmentError("environment failed on " + key + ": " + e.what(), key);
  }
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw EnvironmentError("environment returned " + std::to_string(v) + " for " + key +
                               " (expected a value in [0, 1])",
                           key);
  }
  return v;
}

void pick_best(SearchResult& r) {
  r.best_value = -std::numeric_limits<double>::infinity();
  for (const auto& rec : r.history) {
    if (rec.value > r.best_value) {
      r.best_value = rec.value;
      r.best = rec.config;
    }
  }
}

}  // namespace

void SearchParams::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("search: epsilon must lie in [0, 1]");
  }
  if (initial_size < 1) throw std::invalid_argument("search: initial_size must be >= 1");
  if (budget < initial_size) {
    throw std::invalid_argument("search: budget T must be >= initial_size");
  }
  if (max_steps < 0) throw std::invalid_argument("search: max_steps must be >= 0");
}

std::string_view step_kind_name(StepKind k) {
  switch (k) {
    case StepKind::kWarmStart: return "warm_start";
    case StepKind::kGreedy: return "greedy";
    case StepKind::kExplore: return "explore";
  }
  return "unknown";
}

std::vector<double> reward_series(const std::vector<HistoryRecord>& history) {
  std::vector<double> r;
  for (size_t t = 1; t < history.size(); ++t) r.push_back(history[t].value - history[t - 1].value);
  return r;
}

ConfigSampler::ConfigSampler(const SolutionSpace& space, std::uint64_t seed)
    : space_(space), total_(binomial(space.K, space.k)), rng_(seed) {
  space_.validate();
}

std::optional<BeamConfig> ConfigSampler::draw(const std::unordered_set<std::string>& exclude) {
  if (exclude.size() >= total_) return std::nullopt;
  std::uniform_int_distribution<std::uint64_t> pick(0, total_ - 1);
  // Rejection is cheap while at most half the space is excluded.
  if (exclude.size() * 2 <= total_) {
    while (true) {
      BeamConfig s = unrank_config(pick(rng_), space_);
      if (!exclude.count(canonical_key(s))) return s;
    }
  }
  std::vector<BeamConfig> remaining;
  for_each_config(space_, [&](const BeamConfig& s) {
    if (!exclude.count(canonical_key(s))) remaining.push_back(s);
  });
  std::uniform_int_distribution<size_t> idx(0, remaining.size() - 1);
  return remaining[idx(rng_)];
}

ActionVec get_best_action(const BeamConfig& s, const ValuePredictor& predictor,
                          const SolutionSpace& space, const FeatureProvider& features,
                          std::mt19937_64& rng, long* predictions) {
  const std::vector<ActionVec> actions = enumerate_valid_actions(s, space);
  if (actions.empty()) {
    throw SearchError("no valid action from state " + canonical_key(s));
  }
  std::vector<FeatureVector> succ;
  succ.reserve(actions.size());
  for (const auto& a : actions) succ.push_back(features.features(*apply_action(s, a, space)));
  const std::vector<double> scores = predictor.predict_batch(succ);
  if (predictions) *predictions += static_cast<long>(scores.size());
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<size_t> ties;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] == top) ties.push_back(i);
  }
  if (ties.size() == 1) return actions[ties.front()];
  std::uniform_int_distribution<size_t> pick(0, ties.size() - 1);
  return actions[ties[pick(rng)]];
}

SearchResult epsilon_greedy_search(Environment& env, const SolutionSpace& space,
                                   const SearchParams& params,
                                   const FeatureProvider& features) {
  space.validate();
  params.validate();
  const std::uint64_t total = binomial(space.K, space.k);
  if (static_cast<std::uint64_t>(params.budget) > total) {
    throw BudgetError("budget T = " + std::to_string(params.budget) + " exceeds the " +
                      std::to_string(total) + " configurations of the solution space");
  }

  SearchResult r;
  r.method = "egs";
  r.space = space;
  r.params = params;
  r.env_descriptor = env.descriptor();

  PredictorSpec pspec = params.predictor;
  pspec.input_dim = features.dim();

  ConfigSampler sampler(space, params.seed);
  std::mt19937_64 policy(derive_seed(params.seed, kPolicyStream));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::unordered_set<std::string> visited;
  std::unordered_map<std::string, double> known;
  TrainSet train_set;
  ValuePredictor predictor;

  auto retrain = [&] {
    pspec.seed = derive_seed(derive_seed(params.seed, kPredictorStream) ^ params.predictor.seed,
                             static_cast<std::uint64_t>(r.trainings));
    predictor = ValuePredictor::fit(pspec, train_set);
    ++r.trainings;
  };

  int step = 0;
  for (int i = 0; i < params.initial_size; ++i) {
    BeamConfig s = *sampler.draw(visited);
    const std::string key = canonical_key(s);
    const double v = evaluate(env, s);
    ++r.env_calls;
    visited.insert(key);
    known.emplace(key, v);
    train_set.add(key, features.features(s), v);
    r.history.push_back({step++, s, v, StepKind::kWarmStart, {},
                         std::numeric_limits<double>::quiet_NaN(), true});
  }
  retrain();
  pick_best(r);
  BeamConfig state = r.best;

  const int max_steps = params.max_steps > 0 ? params.max_steps : 100 * params.budget;
  int loop_steps = 0;
  while (r.env_calls < params.budget) {
    if (loop_steps++ >= max_steps) {
      r.stalled = true;
      break;
    }
    const double u = unit(policy);
    HistoryRecord rec;
    rec.epsilon_draw = u;
    if (u < params.epsilon) {
      rec.kind = StepKind::kExplore;
      if (params.exploration == Exploration::kRandomState) {
        auto next = sampler.draw(visited);
        if (!next) throw SearchError("solution space exhausted");
        state = *next;
      } else {
        const auto actions = enumerate_valid_actions(state, space);
        if (actions.empty()) {
          throw SearchError("no valid action from state " + canonical_key(state));
        }
        std::uniform_int_distribution<size_t> pick(0, actions.size() - 1);
        rec.action = actions[pick(policy)];
        state = *apply_action(state, rec.action, space);
      }
    } else {
      rec.kind = StepKind::kGreedy;
      rec.action = get_best_action(state, predictor, space, features, policy, &r.predictions);
      state = *apply_action(state, rec.action, space);
    }
    const std::string key = canonical_key(state);
    rec.step = step++;
    rec.config = state;
    if (auto it = known.find(key); it != known.end()) {
      rec.value = it->second;
    } else {
      rec.value = evaluate(env, state);
      rec.evaluated = true;
      ++r.env_calls;
      visited.insert(key);
      known.emplace(key, rec.value);
      train_set.add(key, features.features(state), rec.value);
      retrain();
    }
    r.history.push_back(std::move(rec));
  }
  pick_best(r);
  r.rewards = reward_series(r.history);
  return r;
}

SearchResult random_search(Environment& env, const SolutionSpace& space, int budget,
                           std::uint64_t seed) {
  space.validate();
  if (budget < 1) throw std::invalid_argument("random search: T must be >= 1");
  const std::uint64_t total = binomial(space.K, space.k);
  if (static_cast<std::uint64_t>(budget) > total) {
    throw BudgetError("budget T = " + std::to_string(budget) + " exceeds the " +
                      std::to_string(total) + " configurations of the solution space");
  }
  SearchResult r;
  r.method = "random";
  r.space = space;
  r.params.epsilon = 1.0;
  r.params.budget = budget;
  r.params.initial_size = budget;
  r.params.seed = seed;
  r.env_descriptor = env.descriptor();
  ConfigSampler sampler(space, seed);
  std::unordered_set<std::string> visited;
  for (int i = 0; i < budget; ++i) {
    BeamConfig s = *sampler.draw(visited);
    visited.insert(canonical_key(s));
    const double v = evaluate(env, s);
    ++r.env_calls;
    r.history.push_back({i, s, v, StepKind::kExplore, {},
                         std::numeric_limits<double>::quiet_NaN(), true});
  }
  pick_best(r);
  r.rewards = reward_series(r.history);
  return r;
}

ExhaustiveTable exhaustive_search(Environment& env, const SolutionSpace& space,
                                  std::uint64_t cap) {
  ExhaustiveTable t;
  ConfigEnumerator it(space, cap);
  t.configs.reserve(it.total());
  t.values.reserve(it.total());
  BeamConfig s;
  while (it.next(s)) {
    const double v = evaluate(env, s);
    if (t.values.empty() || v > t.values[t.argmax]) t.argmax = t.values.size();
    t.configs.push_back(s);
    t.values.push_back(v);
  }
  return t;
}

double fraction_better(const ExhaustiveTable& table, double value) {
  const auto better = std::count_if(table.values.begin(), table.values.end(),
                                    [&](double v) { return v > value; });
  return static_cast<double>(better) / static_cast<double>(table.values.size());
}

}  // namespace beamopt
