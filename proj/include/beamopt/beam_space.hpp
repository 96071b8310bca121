#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace beamopt {

/// Discrete solution space: choose k of the K candidate beams (IDs 1..K);
/// an action moves each selected beam by at most m positions.
struct SolutionSpace {
  int K = 0;
  int k = 0;
  int m = 1;

  /// Throws std::invalid_argument unless K > k >= 1, K >= 2 and m >= 1.
  void validate() const;
};

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A state: k strictly ascending beam IDs in [1, K].
class BeamConfig {
 public:
  BeamConfig() = default;

  const std::vector<int>& ids() const { return ids_; }
  int size() const { return static_cast<int>(ids_.size()); }
  int operator[](int i) const { return ids_[static_cast<size_t>(i)]; }

  friend bool operator==(const BeamConfig&, const BeamConfig&) = default;
  friend auto operator<=>(const BeamConfig&, const BeamConfig&) = default;

 private:
  friend BeamConfig make_config(std::vector<int>, const SolutionSpace&);
  friend std::optional<BeamConfig> try_make_config(std::vector<int>,
                                                   const SolutionSpace&);
  explicit BeamConfig(std::vector<int> ids) : ids_(std::move(ids)) {}

  std::vector<int> ids_;
};

/// Per-beam offsets, each in [-m, m]. The all-zero vector is never a valid
/// action.
using ActionVec = std::vector<int>;

/// Sorts `ids` ascending, then validates length, range and uniqueness.
/// Throws InvalidConfig on violation.
BeamConfig make_config(std::vector<int> ids, const SolutionSpace& space);

/// Non-throwing variant of make_config.
std::optional<BeamConfig> try_make_config(std::vector<int> ids,
                                          const SolutionSpace& space);

/// s + a, re-sorted. std::nullopt when a component leaves [1, K], a
/// duplicate arises, or the action itself is malformed (wrong length, zero,
/// or an entry outside [-m, m]).
std::optional<BeamConfig> apply_action(const BeamConfig& s, const ActionVec& a,
                                       const SolutionSpace& space);

/// Every non-zero action whose application is valid, in lexicographic order
/// of the delta vector.
std::vector<ActionVec> enumerate_valid_actions(const BeamConfig& s,
                                               const SolutionSpace& space);

/// "7-8-9-10"
std::string canonical_key(const BeamConfig& s);

/// Parses a canonical key back into a config.
BeamConfig parse_key(const std::string& key, const SolutionSpace& space);

/// C(n, r); saturates at UINT64_MAX on overflow.
std::uint64_t binomial(int n, int r);

class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 2'000'000;

/// Lazily walks every k-combination of [1, K] in ascending lexicographic
/// order. Construction throws CapExceeded when C(K, k) > cap.
class ConfigEnumerator {
 public:
  explicit ConfigEnumerator(const SolutionSpace& space,
                            std::uint64_t cap = kDefaultEnumerationCap);

  std::uint64_t total() const { return total_; }

  /// Writes the next config into `out`; false when exhausted.
  bool next(BeamConfig& out);

 private:
  SolutionSpace space_;
  std::uint64_t total_ = 0;
  std::vector<int> current_;
  bool started_ = false;
  bool done_ = false;
};

/// Calls `fn` for each config; same ordering and cap semantics as
/// ConfigEnumerator.
void for_each_config(const SolutionSpace& space,
                     const std::function<void(const BeamConfig&)>& fn,
                     std::uint64_t cap = kDefaultEnumerationCap);

/// The config at position `rank` in lexicographic order (0-based).
BeamConfig unrank_config(std::uint64_t rank, const SolutionSpace& space);

/// k beam IDs spread as evenly as possible over [first, last].
BeamConfig equidistant_config(const SolutionSpace& space, int first, int last);

}  // namespace beamopt
