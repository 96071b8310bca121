#pragma once

#include "beamopt/search.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace beamopt {

/// External evaluator invoked once per uncached configuration. The program
/// reads one line `{"beam_ids":[...]}` on stdin and prints one line
/// `{"value":x}` with x in [0, 1] on stdout, exiting with status 0.
struct BridgeSpec {
  std::vector<std::string> command;  // argv; command[0] is looked up in PATH
  double timeout_seconds = 86400.0;
  /// JSON-lines cache file; empty disables persistence.
  std::filesystem::path cache_path;
  int retries = 0;

  void validate() const;
};

/// Cache location from BEAMOPT_CACHE_DIR when set, else `fallback_dir`.
std::filesystem::path default_cache_path(const std::filesystem::path& fallback_dir);

enum class BridgeErrorKind { kSpawnFailed, kNonZeroExit, kMalformed, kOutOfRange, kTimeout };

std::string_view bridge_error_name(BridgeErrorKind k);

class BridgeError : public EnvironmentError {
 public:
  BridgeError(BridgeErrorKind kind, const std::string& what, std::string config_key,
              std::string raw_output)
      : EnvironmentError(what, std::move(config_key)),
        kind_(kind),
        raw_output_(std::move(raw_output)) {}

  BridgeErrorKind kind() const { return kind_; }
  const std::string& raw_output() const { return raw_output_; }

 private:
  BridgeErrorKind kind_;
  std::string raw_output_;
};

/// FNV-1a over the NUL-separated argv.
std::uint64_t command_hash(const std::vector<std::string>& command);

/// Request line for `s`, without the trailing newline.
std::string bridge_request(const BeamConfig& s);

/// Parses a response line; throws BridgeError (kMalformed / kOutOfRange).
double parse_bridge_response(const std::string& line, const std::string& config_key);

class ExternalEnvironment final : public Environment {
 public:
  /// Loads matching entries from spec.cache_path when it exists. Ignores
  /// SIGPIPE process-wide so a child that exits early cannot kill the caller.
  explicit ExternalEnvironment(BridgeSpec spec);

  /// Cache hits return without spawning. Safe for concurrent calls.
  double value(const BeamConfig& s) override;
  std::string descriptor() const override;

  long spawns() const { return spawns_.load(); }
  long cache_hits() const { return cache_hits_.load(); }
  size_t cache_size() const;
  const BridgeSpec& spec() const { return spec_; }

 private:
  double run_once(const BeamConfig& s, const std::string& key);
  void persist(const std::string& key, double value);

  BridgeSpec spec_;
  std::uint64_t command_hash_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, double> cache_;
  std::atomic<long> spawns_{0};
  std::atomic<long> cache_hits_{0};
};

}  // namespace beamopt
