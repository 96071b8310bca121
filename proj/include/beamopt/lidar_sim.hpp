#pragma once

#include "beamopt/beam_space.hpp"
#include "beamopt/point_cloud.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <span>
#include <vector>

namespace beamopt {

/// Spinning multi-beam scanner. Beams are evenly spaced in elevation; beam
/// ID 1 is the uppermost, ID K the lowermost.
struct ScannerSpec {
  int num_beams = 32;
  double elevation_min_deg = -30.67;
  double elevation_max_deg = 10.67;
  int azimuth_steps = 720;
  double max_range = 80.0;
  double sensor_height = 1.8;

  void validate() const;
  /// Elevation of `beam_id` in radians.
  double beam_elevation(int beam_id) const;
};

struct Box {
  Eigen::Vector3d min;
  Eigen::Vector3d max;
  SemanticClass label = SemanticClass::kBuilding;

  friend bool operator==(const Box&, const Box&) = default;
};

struct Sphere {
  Eigen::Vector3d center;
  double radius = 1.0;
  SemanticClass label = SemanticClass::kVegetation;

  friend bool operator==(const Sphere&, const Sphere&) = default;
};

/// Planar vehicle pose; the sensor sits `sensor_height` above (x, y).
struct Pose2 {
  double x = 0;
  double y = 0;
  double yaw = 0;

  friend bool operator==(const Pose2&, const Pose2&) = default;
};

Eigen::Isometry3d lift_pose(const Pose2& p, double height);

struct SceneParams {
  std::uint64_t seed = 7;
  /// The route is a rectangular loop with these side lengths (meters).
  double loop_length = 100.0;
  double loop_width = 60.0;
  /// Minimum distance from the route centerline to any building face.
  double building_setback = 7.0;
  double building_height_min = 3.0;
  double building_height_max = 24.0;
  /// Trees, poles and cars are placed per 100 m of route.
  double trees_per_100m = 6.0;
  double poles_per_100m = 5.0;
  double cars_per_100m = 4.0;
  /// Maximum along-road displacement of a car between frames.
  double car_jitter = 3.0;
  int route_poses = 120;
  double map_pose_spacing = 2.5;

  void validate() const;
};

/// Ground plane (z = 0, road) plus axis-aligned solids. Dynamic boxes are
/// displaced per frame by `dynamic_offset`.
struct Scene {
  SceneParams params;
  std::vector<Box> boxes;
  std::vector<Sphere> spheres;
  std::vector<Pose2> route;
  std::vector<Pose2> map_route;

  /// Planar displacement of dynamic box `index` at `frame`. Frame 0 is the
  /// nominal placement.
  Eigen::Vector3d dynamic_offset(size_t index, std::uint64_t frame) const;

  bool point_inside_solid(const Eigen::Vector3d& p, std::uint64_t frame) const;
};

/// Deterministic in params.seed.
Scene generate_scene(const SceneParams& params);

/// One full revolution from `pose`. Points carry their beam ID and the
/// label of the surface hit; rays without a hit within max_range produce no
/// point. Dynamic boxes are placed according to `frame`.
LabeledPointCloud scan(const Scene& scene, const Eigen::Isometry3d& pose,
                       const ScannerSpec& spec, std::uint64_t frame = 0);

/// World-frame hit of a single ray, for frame consistency checks.
struct RayHit {
  double range = 0;
  Eigen::Vector3d point;
  SemanticClass label = SemanticClass::kOther;
};
bool cast_ray(const Scene& scene, const Eigen::Vector3d& origin,
              const Eigen::Vector3d& direction, double max_range,
              std::uint64_t frame, RayHit& hit);

/// Points whose beam ID belongs to `beams`; pose unchanged.
LabeledPointCloud subsample_beams(const LabeledPointCloud& cloud,
                                  std::span<const int> beams);
LabeledPointCloud subsample_beams(const LabeledPointCloud& cloud,
                                  const BeamConfig& s);

/// Static world-frame map.
struct MapCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<SemanticClass> labels;

  size_t size() const { return points.size(); }
};

/// Keeps the first point that falls into each voxel, preserving order.
MapCloud voxel_thin(const MapCloud& cloud, double voxel);

/// World-frame union of full scans at `poses` (nominal frame), without
/// dynamic points, voxel-thinned.
MapCloud build_map(const Scene& scene, std::span<const Pose2> poses,
                   const ScannerSpec& spec, double voxel = 0.1);

}  // namespace beamopt
