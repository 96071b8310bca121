#pragma once

#include "beamopt/beam_space.hpp"
#include "beamopt/point_cloud.hpp"

#include <array>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace beamopt {

/// Per-beam descriptors averaged over M scans.
struct BeamStats {
  double pts = 0;                          // mean point count
  std::array<double, kNumClasses> sem_pts{};  // mean count per superclass
  double dist = 0;      // mean horizontal distance [m]
  double std_dist = 0;  // mean per-scan stddev of horizontal distance [m]
  double phi = 0;       // mean elevation [rad]
  int scans = 0;        // M

  friend bool operator==(const BeamStats&, const BeamStats&) = default;
};

/// Features per beam slot in the feature vector.
inline constexpr int kBeamFeatures = 4 + kNumClasses;

/// Length of the feature vector for k beams: 9k beam-wise entries plus the
/// (k - 1) consecutive elevation differences.
constexpr int feature_dim(int k) { return kBeamFeatures * k + (k - 1); }

/// Throws std::invalid_argument when no scan has a point on `beam_id`.
BeamStats beam_stats(std::span<const LabeledPointCloud> scans, int beam_id);

/// Elevation difference upper.phi - lower.phi for beams lower_id < upper_id.
double pairwise_phi_diff(const BeamStats& lower, const BeamStats& upper);

/// Stats for beam IDs 1..K.
class BeamStatsTable {
 public:
  BeamStatsTable() = default;
  explicit BeamStatsTable(std::map<int, BeamStats> rows) : rows_(std::move(rows)) {}

  /// Throws std::out_of_range on a missing beam.
  const BeamStats& at(int beam_id) const;
  bool contains(int beam_id) const { return rows_.count(beam_id) > 0; }
  const std::map<int, BeamStats>& rows() const { return rows_; }
  size_t size() const { return rows_.size(); }

  /// CSV with header; one row per beam (id, 9 features, M).
  void write_csv(std::ostream& os) const;

  friend bool operator==(const BeamStatsTable&, const BeamStatsTable&) = default;

 private:
  std::map<int, BeamStats> rows_;
};

/// Inverse of BeamStatsTable::write_csv; lines starting with '#' are
/// skipped. Throws std::invalid_argument on a malformed file.
BeamStatsTable read_stats_csv(std::istream& is);

BeamStatsTable compute_stats_table(std::span<const LabeledPointCloud> scans,
                                   int num_beams);

struct FeatureSlot {
  int beam_slot;  // 0-based slot in the config; pairwise entries use the lower slot
  std::string name;
};

/// Index -> (slot, feature name) for a k-beam feature vector.
std::vector<FeatureSlot> feature_layout(int k);

using FeatureVector = std::vector<double>;

/// Beam-wise 9-tuples of each beam in ascending order, followed by the
/// consecutive-pair elevation differences.
FeatureVector feature_vector(const BeamConfig& s, const BeamStatsTable& table);

/// Raw beam IDs as features (ablation baseline).
FeatureVector beam_id_encoding(const BeamConfig& s);

/// Per-dimension z-score statistics.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  /// Dimensions with stddev below 1e-12 map to 0.
  FeatureVector apply(const FeatureVector& x) const;
};

inline constexpr double kDegenerateStddev = 1e-12;

/// Returns the normalized batch and the statistics used. Throws on an empty
/// or ragged batch.
std::pair<std::vector<FeatureVector>, NormStats> normalize(
    const std::vector<FeatureVector>& batch);

/// Maps a config to a fixed-length feature vector.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual int dim() const = 0;
  virtual FeatureVector features(const BeamConfig& s) const = 0;
  virtual std::string name() const = 0;
};

class StatsFeatureProvider final : public FeatureProvider {
 public:
  StatsFeatureProvider(BeamStatsTable table, int k) : table_(std::move(table)), k_(k) {}
  int dim() const override { return feature_dim(k_); }
  FeatureVector features(const BeamConfig& s) const override {
    return feature_vector(s, table_);
  }
  std::string name() const override { return "beam-stats"; }

 private:
  BeamStatsTable table_;
  int k_;
};

class BeamIdFeatureProvider final : public FeatureProvider {
 public:
  explicit BeamIdFeatureProvider(int k) : k_(k) {}
  int dim() const override { return k_; }
  FeatureVector features(const BeamConfig& s) const override {
    return beam_id_encoding(s);
  }
  std::string name() const override { return "beam-id"; }

 private:
  int k_;
};

}  // namespace beamopt
