#pragma once

#include "beamopt/search.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace beamopt {

/// Identity stamped into every output file.
struct Provenance {
  std::string config_hash;
  std::string env_descriptor;
};

nlohmann::json result_to_json(const SearchResult& r, const Provenance& prov);

/// Columns: step, beam_ids, value, epsilon_draw, action, kind, evaluated.
/// The first line is a comment carrying the tool version and provenance.
void write_history_csv(std::ostream& os, const SearchResult& r, const Provenance& prov);

/// Columns: index, beam_ids, value (lexicographic order).
void write_exhaustive_csv(std::ostream& os, const ExhaustiveTable& t, const Provenance& prov);

/// What `report` needs from a result file.
struct ResultSummary {
  std::string source;
  std::string method;
  std::string config_hash;
  std::string env_descriptor;
  std::uint64_t seed = 0;
  int budget = 0;
  int env_calls = 0;
  std::string best_key;
  double best_value = 0;
  /// Values of the environment-evaluated records in call order.
  std::vector<double> evaluated_values;
};

ResultSummary read_result(const std::filesystem::path& path);

/// Best value after each environment call; non-decreasing.
std::vector<double> best_so_far(const std::vector<double>& evaluated_values);

/// Throws std::invalid_argument when the results come from different
/// environment snapshots.
void check_same_environment(const std::vector<ResultSummary>& results);

/// CSV with column `env_call` followed by one column per result.
void write_best_so_far_csv(std::ostream& os, const std::vector<ResultSummary>& results);

/// Plain-text table, one row per result.
void write_summary_table(std::ostream& os, const std::vector<ResultSummary>& results);

}  // namespace beamopt
