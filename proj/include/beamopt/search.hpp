#pragma once

#include "beamopt/beam_space.hpp"
#include "beamopt/features.hpp"
#include "beamopt/predictor.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace beamopt {

/// Black-box task value of a beam configuration. value() must be
/// deterministic for a fixed environment and return a number in [0, 1].
class Environment {
 public:
  virtual ~Environment() = default;
  virtual double value(const BeamConfig& s) = 0;
  virtual std::string descriptor() const = 0;
};

/// Environment failure with the offending configuration attached.
class EnvironmentError : public std::runtime_error {
 public:
  EnvironmentError(const std::string& what, std::string config_key)
      : std::runtime_error(what), config_key_(std::move(config_key)) {}
  const std::string& config_key() const { return config_key_; }

 private:
  std::string config_key_;
};

/// Raised when the search cannot continue (no valid action, exhausted space).
class SearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Budget or enumeration-cap violation detected before any evaluation.
class BudgetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Exploration {
  kRandomState,   // jump to a uniformly drawn unvisited configuration
  kRandomAction,  // apply a uniformly drawn valid action
};

struct SearchParams {
  double epsilon = 0.2;
  /// Total environment requests, warm start included.
  int budget = 200;
  int initial_size = 10;
  std::uint64_t seed = 0;
  Exploration exploration = Exploration::kRandomState;
  /// Upper bound on loop iterations; 0 selects 100 * budget.
  int max_steps = 0;
  PredictorSpec predictor;

  void validate() const;
};

enum class StepKind { kWarmStart, kGreedy, kExplore };

std::string_view step_kind_name(StepKind k);

struct HistoryRecord {
  int step = 0;
  BeamConfig config;
  double value = 0;
  StepKind kind = StepKind::kWarmStart;
  /// Action applied to reach `config`; empty for warm-start samples and
  /// random-state jumps.
  ActionVec action;
  /// The uniform draw compared against epsilon (NaN for warm start).
  double epsilon_draw = 0;
  /// True when this visit triggered an environment request.
  bool evaluated = false;
};

struct SearchResult {
  std::string method;
  SolutionSpace space;
  SearchParams params;
  std::string env_descriptor;
  std::vector<HistoryRecord> history;
  /// r_t = v_t - v_{t-1} over the history's value series (size - 1 entries).
  std::vector<double> rewards;
  BeamConfig best;
  double best_value = 0;
  int env_calls = 0;
  int trainings = 0;
  long predictions = 0;
  bool stalled = false;
};

std::vector<double> reward_series(const std::vector<HistoryRecord>& history);

/// Draws configurations uniformly without replacement. Shared by random
/// search and the exploration step so both consume identical sequences.
class ConfigSampler {
 public:
  ConfigSampler(const SolutionSpace& space, std::uint64_t seed);

  /// Next configuration whose key is not in `exclude`; nullopt once every
  /// configuration is excluded.
  std::optional<BeamConfig> draw(const std::unordered_set<std::string>& exclude);

 private:
  SolutionSpace space_;
  std::uint64_t total_;
  std::mt19937_64 rng_;
};

/// Argmax of the predicted value over all valid successors of `s`; exact
/// ties are broken uniformly with `rng`. Throws SearchError when `s` has no
/// valid action. `predictions` (optional) is incremented by the number of
/// successors scored.
ActionVec get_best_action(const BeamConfig& s, const ValuePredictor& predictor,
                          const SolutionSpace& space, const FeatureProvider& features,
                          std::mt19937_64& rng, long* predictions = nullptr);

/// Epsilon-greedy search with a learned value predictor.
SearchResult epsilon_greedy_search(Environment& env, const SolutionSpace& space,
                                   const SearchParams& params,
                                   const FeatureProvider& features);

/// `budget` configurations drawn uniformly without replacement.
SearchResult random_search(Environment& env, const SolutionSpace& space, int budget,
                           std::uint64_t seed);

struct ExhaustiveTable {
  std::vector<BeamConfig> configs;  // lexicographic
  std::vector<double> values;
  size_t argmax = 0;  // earliest maximum

  double max_value() const { return values[argmax]; }
};

ExhaustiveTable exhaustive_search(Environment& env, const SolutionSpace& space,
                                  std::uint64_t cap = kDefaultEnumerationCap);

/// Fraction of table entries strictly greater than `value`.
double fraction_better(const ExhaustiveTable& table, double value);

}  // namespace beamopt
