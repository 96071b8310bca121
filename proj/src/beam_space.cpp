#include "beamopt/beam_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace beamopt {

void SolutionSpace::validate() const {
  if (k < 1) throw std::invalid_argument("solution space: k must be >= 1");
  if (K <= k) throw std::invalid_argument("solution space: K must exceed k");
  if (K < 2) throw std::invalid_argument("solution space: K must be >= 2");
  if (m < 1) throw std::invalid_argument("solution space: m must be >= 1");
}

namespace {

std::string describe(const std::vector<int>& ids) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < ids.size(); ++i) os << (i ? "," : "") << ids[i];
  os << ']';
  return os.str();
}

// Empty string when valid, otherwise the reason. `ids` must be sorted.
std::string check_sorted_ids(const std::vector<int>& ids,
                             const SolutionSpace& space) {
  if (static_cast<int>(ids.size()) != space.k) {
    return "expected " + std::to_string(space.k) + " beam IDs, got " +
           std::to_string(ids.size());
  }
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 1 || ids[i] > space.K) {
      return "beam ID " + std::to_string(ids[i]) + " outside [1, " +
             std::to_string(space.K) + "]";
    }
    if (i > 0 && ids[i] == ids[i - 1]) {
      return "duplicate beam ID " + std::to_string(ids[i]);
    }
  }
  return {};
}

}  // namespace

BeamConfig make_config(std::vector<int> ids, const SolutionSpace& space) {
  const std::string original = describe(ids);
  std::sort(ids.begin(), ids.end());
  if (auto why = check_sorted_ids(ids, space); !why.empty()) {
    throw InvalidConfig("invalid beam config " + original + ": " + why);
  }
  return BeamConfig(std::move(ids));
}

std::optional<BeamConfig> try_make_config(std::vector<int> ids,
                                          const SolutionSpace& space) {
  std::sort(ids.begin(), ids.end());
  if (!check_sorted_ids(ids, space).empty()) return std::nullopt;
  return BeamConfig(std::move(ids));
}

std::optional<BeamConfig> apply_action(const BeamConfig& s, const ActionVec& a,
                                       const SolutionSpace& space) {
  if (static_cast<int>(a.size()) != s.size()) return std::nullopt;
  bool nonzero = false;
  std::vector<int> next(s.ids());
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] < -space.m || a[i] > space.m) return std::nullopt;
    nonzero |= a[i] != 0;
    next[i] += a[i];
  }
  if (!nonzero) return std::nullopt;
  return try_make_config(std::move(next), space);
}

std::vector<ActionVec> enumerate_valid_actions(const BeamConfig& s,
                                               const SolutionSpace& space) {
  const int k = s.size();
  const int m = space.m;
  std::vector<ActionVec> out;
  // Odometer over [-m, m]^k; the first coordinate is most significant, so
  // the sequence is lexicographic.
  ActionVec a(static_cast<size_t>(k), -m);
  std::vector<int> sum(static_cast<size_t>(k));
  while (true) {
    bool nonzero = false;
    bool in_range = true;
    for (int i = 0; i < k; ++i) {
      sum[i] = s[i] + a[i];
      nonzero |= a[i] != 0;
      in_range &= sum[i] >= 1 && sum[i] <= space.K;
    }
    if (nonzero && in_range) {
      std::sort(sum.begin(), sum.end());
      if (std::adjacent_find(sum.begin(), sum.end()) == sum.end()) {
        out.push_back(a);
      }
    }
    int pos = k - 1;
    while (pos >= 0 && a[pos] == m) {
      a[pos] = -m;
      --pos;
    }
    if (pos < 0) break;
    ++a[pos];
  }
  return out;
}

std::string canonical_key(const BeamConfig& s) {
  std::string key;
  for (int i = 0; i < s.size(); ++i) {
    if (i) key += '-';
    key += std::to_string(s[i]);
  }
  return key;
}

BeamConfig parse_key(const std::string& key, const SolutionSpace& space) {
  std::vector<int> ids;
  std::istringstream is(key);
  std::string part;
  while (std::getline(is, part, '-')) {
    try {
      size_t used = 0;
      ids.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw InvalidConfig("malformed config key '" + key + "'");
    }
  }
  return make_config(std::move(ids), space);
}

std::uint64_t binomial(int n, int r) {
  if (r < 0 || n < 0 || r > n) return 0;
  r = std::min(r, n - r);
  std::uint64_t result = 1;
  for (int i = 1; i <= r; ++i) {
    const std::uint64_t num = static_cast<std::uint64_t>(n - r + i);
    // result * num / i is exact at every step; guard the multiplication.
    if (result > std::numeric_limits<std::uint64_t>::max() / num) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    result = result * num / static_cast<std::uint64_t>(i);
  }
  return result;
}

ConfigEnumerator::ConfigEnumerator(const SolutionSpace& space,
                                   std::uint64_t cap)
    : space_(space) {
  space_.validate();
  total_ = binomial(space.K, space.k);
  if (total_ > cap) {
    throw CapExceeded("C(" + std::to_string(space.K) + ", " +
                      std::to_string(space.k) + ") = " +
                      std::to_string(total_) +
                      " configurations exceeds the enumeration cap of " +
                      std::to_string(cap));
  }
}

bool ConfigEnumerator::next(BeamConfig& out) {
  if (done_) return false;
  const int k = space_.k;
  if (!started_) {
    current_.resize(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) current_[i] = i + 1;
    started_ = true;
  } else {
    int i = k - 1;
    while (i >= 0 && current_[i] == space_.K - (k - 1 - i)) --i;
    if (i < 0) {
      done_ = true;
      return false;
    }
    ++current_[i];
    for (int j = i + 1; j < k; ++j) current_[j] = current_[j - 1] + 1;
  }
  out = make_config(current_, space_);
  return true;
}

void for_each_config(const SolutionSpace& space,
                     const std::function<void(const BeamConfig&)>& fn,
                     std::uint64_t cap) {
  ConfigEnumerator it(space, cap);
  BeamConfig s;
  while (it.next(s)) fn(s);
}

BeamConfig unrank_config(std::uint64_t rank, const SolutionSpace& space) {
  const std::uint64_t total = binomial(space.K, space.k);
  if (rank >= total) throw std::out_of_range("config rank out of range");
  std::vector<int> ids;
  int next_id = 1;
  for (int slot = space.k; slot > 0; --slot) {
    // Count combinations that start with `next_id` for the remaining slots.
    while (true) {
      const std::uint64_t with_this = binomial(space.K - next_id, slot - 1);
      if (rank < with_this) break;
      rank -= with_this;
      ++next_id;
    }
    ids.push_back(next_id);
    ++next_id;
  }
  return make_config(std::move(ids), space);
}

BeamConfig equidistant_config(const SolutionSpace& space, int first,
                              int last) {
  const int k = space.k;
  if (first < 1 || last > space.K || last - first + 1 < k) {
    throw InvalidConfig("equidistant range too small for k beams");
  }
  std::vector<int> ids;
  for (int i = 0; i < k; ++i) {
    const double t = k == 1 ? 0.5 : static_cast<double>(i) / (k - 1);
    int id = static_cast<int>(std::lround(first + t * (last - first)));
    if (!ids.empty()) id = std::max(id, ids.back() + 1);
    ids.push_back(id);
  }
  // Pushing right can overflow `last`; pull back from the end.
  for (int i = k - 1; i >= 0; --i) {
    const int limit = last - (k - 1 - i);
    if (ids[i] > limit) ids[i] = limit;
  }
  return make_config(std::move(ids), space);
}

}  // namespace beamopt
