#pragma once

#include "beamopt/env_bridge.hpp"
#include "beamopt/loc_env.hpp"
#include "beamopt/search.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace beamopt {

inline constexpr const char* kToolName = "beamopt";
inline constexpr const char* kToolVersion = "0.1.0";

/// Schema violation; `keys` lists the offending dotted paths.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::vector<std::string> keys)
      : std::runtime_error(what), keys_(std::move(keys)) {}
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
};

enum class EnvType { kBuiltinLoc, kBridge };
enum class FeatureKind { kBeamStats, kBeamId };

struct RunConfig {
  SolutionSpace space{32, 4, 2};
  SearchParams search;  // search.predictor holds the predictor section
  FeatureKind features = FeatureKind::kBeamStats;
  EnvType env = EnvType::kBuiltinLoc;
  /// builtin-loc: the scanner's num_beams always equals space.K.
  LocEnvConfig loc;
  std::filesystem::path snapshot_path;  // default: <output.dir>/snapshot.bin
  unsigned threads = 0;
  BridgeSpec bridge;
  /// Per-beam stats CSV for beam-stats features with a bridge environment.
  std::filesystem::path stats_path;
  std::filesystem::path output_dir = "out";
};

/// Validates against the schema. Required: space.K, space.k, env.type.
/// Unknown keys anywhere are collected and reported together.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Normalized document with every default filled in.
nlohmann::json to_json(const RunConfig& c);

/// Hash of the normalized document without the output section, so the
/// same experiment written to different directories hashes equally.
std::string config_hash(const RunConfig& c);

/// Directory-independent snapshot location.
std::filesystem::path snapshot_path(const RunConfig& c);

std::string_view exploration_name(Exploration e);
std::string_view feature_kind_name(FeatureKind f);

}  // namespace beamopt
