#include "beamopt/loc_env.hpp"

#include "beamopt/hash.hpp"
#include "beamopt/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>

namespace beamopt {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

void RewardSpec::validate() const {
  for (double w : weights) {
    if (!(w > 0)) throw std::invalid_argument("reward: weights must be positive");
  }
  for (const auto& t : thresholds) {
    if (!(t.translation_m > 0) || !(t.rotation_deg > 0)) {
      throw std::invalid_argument("reward: thresholds must be positive");
    }
  }
  for (size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i].translation_m > thresholds[i - 1].translation_m) ||
        !(thresholds[i].rotation_deg > thresholds[i - 1].rotation_deg)) {
      throw std::invalid_argument("reward: thresholds must increase strictly");
    }
  }
}

double RewardSpec::value(const std::array<double, 3>& acc) const {
  double num = 0, den = 0;
  for (size_t i = 0; i < 3; ++i) {
    num += weights[i] * acc[i];
    den += weights[i];
  }
  return num / den;
}

void NoiseSpec::validate() const {
  if (!(translation_stddev >= 0) || !(yaw_stddev_deg >= 0)) {
    throw std::invalid_argument("noise: standard deviations must be non-negative");
  }
}

void LocEnvConfig::validate() const {
  scene.validate();
  scanner.validate();
  icp.validate();
  reward.validate();
  noise.validate();
  if (eval_poses < 1) throw std::invalid_argument("env: eval_poses must be >= 1");
  if (eval_poses > scene.route_poses) {
    throw std::invalid_argument("env: eval_poses exceeds the number of route poses");
  }
  if (!(map_voxel > 0)) throw std::invalid_argument("env: map_voxel must be positive");
}

Eigen::Isometry3d ground_truth_pose(const Snapshot& snap, int route_index) {
  return lift_pose(snap.scene.route.at(static_cast<size_t>(route_index)),
                   snap.config.scanner.sensor_height);
}

Eigen::Isometry3d perturbed_pose(const Snapshot& snap, int route_index) {
  const Pose2& gt = snap.scene.route.at(static_cast<size_t>(route_index));
  const Pose2& n = snap.noise.at(static_cast<size_t>(route_index));
  return lift_pose({gt.x + n.x, gt.y + n.y, gt.yaw + n.yaw}, snap.config.scanner.sensor_height);
}

LabeledPointCloud route_scan(const Snapshot& snap, int route_index) {
  return scan(snap.scene, ground_truth_pose(snap, route_index), snap.config.scanner,
              static_cast<std::uint64_t>(route_index) + 1);
}

Snapshot build_snapshot(const LocEnvConfig& config) {
  config.validate();
  Snapshot snap;
  snap.config = config;
  snap.scene = generate_scene(config.scene);
  snap.map = build_map(snap.scene, snap.scene.map_route, config.scanner, config.map_voxel);
  snap.normals = estimate_normals(snap.map.points, config.icp.normal_neighbors);

  const int n_route = static_cast<int>(snap.scene.route.size());
  std::vector<int> all(static_cast<size_t>(n_route));
  for (int i = 0; i < n_route; ++i) all[static_cast<size_t>(i)] = i;
  std::mt19937_64 pick(config.eval_seed);
  std::shuffle(all.begin(), all.end(), pick);
  snap.eval_indices.assign(all.begin(), all.begin() + config.eval_poses);
  std::sort(snap.eval_indices.begin(), snap.eval_indices.end());

  std::mt19937_64 rng(config.noise.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  snap.noise.reserve(static_cast<size_t>(n_route));
  for (int i = 0; i < n_route; ++i) {
    Pose2 n;
    n.x = config.noise.translation_stddev * gauss(rng);
    n.y = config.noise.translation_stddev * gauss(rng);
    n.yaw = config.noise.yaw_stddev_deg * kDeg * gauss(rng);
    snap.noise.push_back(n);
  }

  std::vector<LabeledPointCloud> scans(snap.eval_indices.size());
  parallel_for(scans.size(), [&](size_t i) { scans[i] = route_scan(snap, snap.eval_indices[i]); });
  snap.stats = compute_stats_table(scans, config.scanner.num_beams);
  snap.hash = snapshot_content_hash(snap);
  return snap;
}

void write_cloud_csv(std::ostream& os, const LabeledPointCloud& cloud, bool world_frame) {
  os << "x,y,z,class,beam\n" << std::setprecision(9);
  for (const auto& p : cloud.points) {
    const Eigen::Vector3d q = world_frame ? Eigen::Vector3d(cloud.pose * p.xyz) : p.xyz;
    os << q.x() << ',' << q.y() << ',' << q.z() << ',' << class_name(p.label) << ','
       << p.beam_id << '\n';
  }
}

void write_cloud_csv(std::ostream& os, const MapCloud& map) {
  os << "x,y,z,class,beam\n" << std::setprecision(9);
  for (size_t i = 0; i < map.size(); ++i) {
    const auto& q = map.points[i];
    os << q.x() << ',' << q.y() << ',' << q.z() << ',' << class_name(map.labels[i]) << ",0\n";
  }
}

std::array<bool, 3> threshold_hits(const PoseError& e, bool icp_ok, const RewardSpec& reward) {
  std::array<bool, 3> hit{};
  if (!icp_ok) return hit;
  for (size_t i = 0; i < 3; ++i) {
    hit[i] = e.translation <= reward.thresholds[i].translation_m &&
             e.rotation_deg <= reward.thresholds[i].rotation_deg;
  }
  return hit;
}

std::array<double, 3> accuracies(const std::vector<PoseOutcome>& rows) {
  std::array<double, 3> acc{};
  if (rows.empty()) return acc;
  for (size_t i = 0; i < 3; ++i) {
    long hits = 0;
    for (const auto& r : rows) hits += r.hit[i] ? 1 : 0;
    acc[i] = static_cast<double>(hits) / static_cast<double>(rows.size());
  }
  return acc;
}

void RouteReport::write_csv(std::ostream& os) const {
  os << "pose_id,tx,ty,tz,trans_err,rot_err,hit1,hit2,hit3\n" << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.pose_id << ',' << r.gt_translation.x() << ',' << r.gt_translation.y() << ','
       << r.gt_translation.z() << ',' << r.error.translation << ',' << r.error.rotation_deg
       << ',' << int(r.hit[0]) << ',' << int(r.hit[1]) << ',' << int(r.hit[2]) << '\n';
  }
}

LocalizationEnvironment::LocalizationEnvironment(std::shared_ptr<const Snapshot> snap,
                                                 unsigned threads)
    : snap_(std::move(snap)), threads_(threads) {
  if (!snap_) throw std::invalid_argument("localization environment: null snapshot");
  map_ = std::make_unique<RegistrationMap>(snap_->map, snap_->normals);
  const int K = snap_->config.scanner.num_beams;
  eval_points_.resize(snap_->eval_indices.size());
  parallel_for(
      eval_points_.size(),
      [&](size_t i) {
        const LabeledPointCloud c = route_scan(*snap_, snap_->eval_indices[i]);
        auto& per_beam = eval_points_[i];
        per_beam.resize(static_cast<size_t>(K));
        for (const auto& p : c.points) per_beam[static_cast<size_t>(p.beam_id - 1)].push_back(p.xyz);
      },
      threads_);
}

std::string LocalizationEnvironment::descriptor() const {
  return "builtin-loc:" + hex64(snap_->hash);
}

PoseOutcome LocalizationEnvironment::run_pose(int route_index,
                                              std::span<const Eigen::Vector3d> points) const {
  const Eigen::Isometry3d gt = ground_truth_pose(*snap_, route_index);
  const IcpResult icp =
      icp_point_to_plane(points, *map_, perturbed_pose(*snap_, route_index), snap_->config.icp);
  PoseOutcome out;
  out.pose_id = route_index;
  out.gt_translation = gt.translation();
  out.error = pose_error(icp.pose, gt);
  out.icp_ok = icp.ok;
  out.iterations = icp.iterations;
  out.initial_residual = icp.initial_residual;
  out.residual = icp.residual;
  out.hit = threshold_hits(out.error, icp.ok, snap_->config.reward);
  return out;
}

RouteReport LocalizationEnvironment::evaluate(std::span<const int> beams, PoseSet set) const {
  const int K = snap_->config.scanner.num_beams;
  for (int b : beams) {
    if (b < 1 || b > K) {
      throw std::invalid_argument("beam id " + std::to_string(b) + " outside [1, " +
                                  std::to_string(K) + "]");
    }
  }
  RouteReport report;
  if (set == PoseSet::kEvaluation) {
    report.rows.resize(eval_points_.size());
    parallel_for(
        eval_points_.size(),
        [&](size_t i) {
          std::vector<Eigen::Vector3d> pts;
          for (int b : beams) {
            const auto& src = eval_points_[i][static_cast<size_t>(b - 1)];
            pts.insert(pts.end(), src.begin(), src.end());
          }
          report.rows[i] = run_pose(snap_->eval_indices[i], pts);
        },
        threads_);
  } else {
    report.rows.resize(snap_->scene.route.size());
    parallel_for(
        report.rows.size(),
        [&](size_t i) {
          const int idx = static_cast<int>(i);
          const LabeledPointCloud c = subsample_beams(route_scan(*snap_, idx), beams);
          std::vector<Eigen::Vector3d> pts;
          pts.reserve(c.points.size());
          for (const auto& p : c.points) pts.push_back(p.xyz);
          report.rows[i] = run_pose(idx, pts);
        },
        threads_);
  }
  report.accuracy = accuracies(report.rows);
  report.value = snap_->config.reward.value(report.accuracy);
  return report;
}

RouteReport LocalizationEnvironment::evaluate(const BeamConfig& s, PoseSet set) const {
  return evaluate(std::span<const int>(s.ids()), set);
}

double LocalizationEnvironment::value(const BeamConfig& s) {
  const std::string key = canonical_key(s);
  {
    std::lock_guard lock(memo_mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  const double v = evaluate(s, PoseSet::kEvaluation).value;
  ++computed_;
  std::lock_guard lock(memo_mutex_);
  memo_.emplace(key, v);
  return v;
}

}  // namespace beamopt
