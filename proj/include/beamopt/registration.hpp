#pragma once

#include "beamopt/kdtree.hpp"
#include "beamopt/lidar_sim.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace beamopt {

struct IcpParams {
  int max_iterations = 50;
  double translation_tolerance = 1e-4;  // m
  double rotation_tolerance = 1e-4;     // rad
  /// Correspondence rejection distance once the schedule has settled.
  double max_correspondence_distance = 1.0;
  /// Gate used at the first iteration; shrinks geometrically by
  /// `gate_decay` per iteration down to max_correspondence_distance.
  double initial_correspondence_distance = 8.0;
  double gate_decay = 0.8;
  /// Cauchy kernel scale on point-to-plane residuals (m) once settled; 0
  /// disables the kernel. Starts at `initial_robust_scale` and shrinks by
  /// `gate_decay` per iteration. Convergence is only tested once both the
  /// gate and the kernel have settled.
  double robust_scale = 0.05;
  double initial_robust_scale = 2.0;
  int normal_neighbors = 10;

  void validate() const;
};

struct NormalMap {
  std::vector<Eigen::Vector3d> normals;
  std::vector<std::uint8_t> valid;
};

/// Unit normals from PCA over the `neighbors` nearest map points (the point
/// itself included). Neighborhoods that are close to collinear are flagged
/// invalid. Normals are oriented towards +z, then +y, then +x.
NormalMap estimate_normals(const std::vector<Eigen::Vector3d>& points, int neighbors);

/// Map points with valid normals plus a spatial index over them.
class RegistrationMap {
 public:
  RegistrationMap(const MapCloud& map, const NormalMap& normals);

  RegistrationMap(const RegistrationMap&) = delete;
  RegistrationMap& operator=(const RegistrationMap&) = delete;

  const std::vector<Eigen::Vector3d>& points() const { return points_; }
  const std::vector<Eigen::Vector3d>& normals() const { return normals_; }
  int nearest(const Eigen::Vector3d& q, double max_dist) const { return tree_.nearest(q, max_dist); }

 private:
  std::vector<Eigen::Vector3d> points_;
  std::vector<Eigen::Vector3d> normals_;
  KdTree3 tree_;
};

struct IcpResult {
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  /// Mean squared point-to-plane residual at the initial and final pose,
  /// both over correspondences within max_correspondence_distance.
  double initial_residual = std::numeric_limits<double>::infinity();
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int correspondences = 0;
  bool converged = false;
  /// False when fewer than 6 correspondences were found; pose is then the
  /// initial guess and residual is infinite.
  bool ok = false;
};

inline constexpr int kMinCorrespondences = 6;

/// Point-to-plane ICP of sensor-frame `scan` against the map, starting from
/// the sensor-to-world guess `init`.
IcpResult icp_point_to_plane(std::span<const Eigen::Vector3d> scan, const RegistrationMap& map,
                             const Eigen::Isometry3d& init, const IcpParams& params);

struct PoseError {
  double translation = 0;  // m
  double rotation_deg = 0;
};

/// Euclidean translation distance and geodesic angle of est^-1 * gt.
PoseError pose_error(const Eigen::Isometry3d& est, const Eigen::Isometry3d& gt);

}  // namespace beamopt
