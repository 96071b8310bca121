#pragma once

#include "beamopt/features.hpp"
#include "beamopt/lidar_sim.hpp"
#include "beamopt/registration.hpp"
#include "beamopt/search.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace beamopt {

struct RewardThreshold {
  double translation_m = 0;
  double rotation_deg = 0;
};

struct RewardSpec {
  std::array<RewardThreshold, 3> thresholds{{{0.25, 2.0}, {0.50, 5.0}, {5.00, 10.0}}};
  std::array<double, 3> weights{3.0, 2.0, 1.0};

  void validate() const;
  /// Weighted accuracy normalized by the weight sum.
  double value(const std::array<double, 3>& acc) const;
};

/// Coarse initialization error: planar translation and yaw.
struct NoiseSpec {
  double translation_stddev = 2.0;  // m, per planar axis
  double yaw_stddev_deg = 5.0;
  std::uint64_t seed = 11;

  void validate() const;
};

struct LocEnvConfig {
  SceneParams scene;
  ScannerSpec scanner;
  IcpParams icp;
  RewardSpec reward;
  NoiseSpec noise;
  /// Number of route poses in the fixed evaluation subset (P).
  int eval_poses = 100;
  std::uint64_t eval_seed = 5;
  double map_voxel = 0.1;

  void validate() const;
};

/// Frozen environment state. Route pose i is scanned at dynamic frame i + 1,
/// the map at frame 0 with dynamic points removed.
struct Snapshot {
  LocEnvConfig config;
  Scene scene;
  MapCloud map;
  NormalMap normals;
  std::vector<int> eval_indices;  // ascending route indices
  std::vector<Pose2> noise;       // one perturbation per route pose
  BeamStatsTable stats;           // from full scans at the evaluation poses
  std::uint64_t hash = 0;         // content hash of everything above
};

class SnapshotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Snapshot build_snapshot(const LocEnvConfig& config);

/// Binary file: magic, format version, content hash, payload.
void save_snapshot(const Snapshot& snap, const std::filesystem::path& path);
/// Throws SnapshotError on a bad magic, version or hash mismatch.
Snapshot load_snapshot(const std::filesystem::path& path);

std::uint64_t snapshot_content_hash(const Snapshot& snap);

/// Hash of the parameters a snapshot was built from.
std::uint64_t loc_config_hash(const LocEnvConfig& config);

/// CSV rows x,y,z,class,beam (beam is 0 for map points).
void write_cloud_csv(std::ostream& os, const LabeledPointCloud& cloud, bool world_frame);
void write_cloud_csv(std::ostream& os, const MapCloud& map);

Eigen::Isometry3d ground_truth_pose(const Snapshot& snap, int route_index);
Eigen::Isometry3d perturbed_pose(const Snapshot& snap, int route_index);
/// Full-K scan used at `route_index` (dynamic frame route_index + 1).
LabeledPointCloud route_scan(const Snapshot& snap, int route_index);

struct PoseOutcome {
  int pose_id = 0;  // route index
  Eigen::Vector3d gt_translation = Eigen::Vector3d::Zero();
  PoseError error;
  std::array<bool, 3> hit{};
  bool icp_ok = false;
  int iterations = 0;
  double initial_residual = 0;
  double residual = 0;
};

struct RouteReport {
  std::vector<PoseOutcome> rows;
  std::array<double, 3> accuracy{};
  double value = 0;

  void write_csv(std::ostream& os) const;
};

/// Threshold hits of one pose error; failed registrations miss everything.
std::array<bool, 3> threshold_hits(const PoseError& e, bool icp_ok, const RewardSpec& reward);

std::array<double, 3> accuracies(const std::vector<PoseOutcome>& rows);

enum class PoseSet {
  kEvaluation,  // the fixed P-pose subset behind value()
  kRoute,       // every route pose
};

class LocalizationEnvironment final : public Environment {
 public:
  explicit LocalizationEnvironment(std::shared_ptr<const Snapshot> snap, unsigned threads = 0);

  /// Memoized; computed values are a pure function of the snapshot.
  double value(const BeamConfig& s) override;
  std::string descriptor() const override;

  RouteReport evaluate(std::span<const int> beams, PoseSet set = PoseSet::kEvaluation) const;
  RouteReport evaluate(const BeamConfig& s, PoseSet set = PoseSet::kEvaluation) const;

  const Snapshot& snapshot() const { return *snap_; }
  const RegistrationMap& registration_map() const { return *map_; }
  /// Number of value() calls that ran the registrations (cache misses).
  long computed() const { return computed_.load(); }

 private:
  PoseOutcome run_pose(int route_index, std::span<const Eigen::Vector3d> points) const;

  std::shared_ptr<const Snapshot> snap_;
  std::unique_ptr<RegistrationMap> map_;
  unsigned threads_;
  // Sensor-frame points per evaluation pose and beam (index beam_id - 1).
  std::vector<std::vector<std::vector<Eigen::Vector3d>>> eval_points_;
  std::mutex memo_mutex_;
  std::unordered_map<std::string, double> memo_;
  std::atomic<long> computed_{0};
};

}  // namespace beamopt
