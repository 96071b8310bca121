#include "beamopt/lidar_sim.hpp"

#include "beamopt/seed.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace beamopt {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Uniform in [0, 1) from a 64-bit hash; avoids distribution objects so the
// jitter is a pure function of (seed, index, frame).
double hash_unit(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

struct Segment {
  Eigen::Vector2d a;
  Eigen::Vector2d b;

  double length() const { return (b - a).norm(); }
  Eigen::Vector2d dir() const { return (b - a).normalized(); }
  // Left normal of the direction of travel.
  Eigen::Vector2d normal() const {
    const Eigen::Vector2d d = dir();
    return {-d.y(), d.x()};
  }
};

std::vector<Segment> loop_segments(const SceneParams& p) {
  const Eigen::Vector2d c0(0, 0), c1(p.loop_length, 0),
      c2(p.loop_length, p.loop_width), c3(0, p.loop_width);
  return {{c0, c1}, {c1, c2}, {c2, c3}, {c3, c0}};
}

double point_segment_distance(const Eigen::Vector2d& p, const Segment& s) {
  const Eigen::Vector2d ab = s.b - s.a;
  const double t = std::clamp((p - s.a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (s.a + t * ab)).norm();
}

// Distance from a segment to an axis-aligned rectangle (0 if they touch).
double segment_rect_distance(const Segment& s, const Eigen::Vector2d& lo,
                             const Eigen::Vector2d& hi) {
  // Sample the segment densely; rectangles here are at least meters wide.
  double best = std::numeric_limits<double>::infinity();
  const int n = std::max(2, static_cast<int>(s.length() / 0.25));
  for (int i = 0; i <= n; ++i) {
    const Eigen::Vector2d p = s.a + (s.b - s.a) * (static_cast<double>(i) / n);
    const Eigen::Vector2d q = p.cwiseMax(lo).cwiseMin(hi);
    best = std::min(best, (p - q).norm());
  }
  return best;
}

double route_clearance_rect(const std::vector<Segment>& segs,
                            const Eigen::Vector2d& lo,
                            const Eigen::Vector2d& hi) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : segs) best = std::min(best, segment_rect_distance(s, lo, hi));
  return best;
}

double route_clearance_point(const std::vector<Segment>& segs,
                             const Eigen::Vector2d& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : segs) best = std::min(best, point_segment_distance(p, s));
  return best;
}

std::vector<Pose2> sample_loop(const std::vector<Segment>& segs, int count,
                               double phase, double lateral) {
  double perimeter = 0;
  for (const auto& s : segs) perimeter += s.length();
  std::vector<Pose2> poses;
  poses.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    double d = std::fmod((i + phase) * perimeter / count, perimeter);
    for (const auto& s : segs) {
      if (d <= s.length()) {
        const Eigen::Vector2d p = s.a + s.dir() * d + s.normal() * lateral;
        const Eigen::Vector2d dir = s.dir();
        poses.push_back({p.x(), p.y(), std::atan2(dir.y(), dir.x())});
        break;
      }
      d -= s.length();
    }
  }
  return poses;
}

bool intersect_box(const Box& box, const Eigen::Vector3d& offset,
                   const Eigen::Vector3d& o, const Eigen::Vector3d& inv_d,
                   double& t_hit) {
  double t0 = 0.0, t1 = t_hit;
  for (int a = 0; a < 3; ++a) {
    double lo = (box.min[a] + offset[a] - o[a]) * inv_d[a];
    double hi = (box.max[a] + offset[a] - o[a]) * inv_d[a];
    if (lo > hi) std::swap(lo, hi);
    // NaN from 0 * inf (ray on a slab face) must not widen the interval.
    if (lo > t0) t0 = lo;
    if (hi < t1) t1 = hi;
    if (t0 > t1) return false;
  }
  if (t0 <= 1e-9) return false;  // origin inside or on the surface
  t_hit = t0;
  return true;
}

bool intersect_sphere(const Sphere& s, const Eigen::Vector3d& o,
                      const Eigen::Vector3d& d, double& t_hit) {
  const Eigen::Vector3d oc = o - s.center;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0) return false;
  const double sq = std::sqrt(disc);
  double t = -b - sq;
  if (t <= 1e-9) t = -b + sq;
  if (t <= 1e-9 || t >= t_hit) return false;
  t_hit = t;
  return true;
}

struct Candidates {
  std::vector<int> boxes;
  std::vector<int> spheres;
};

Candidates cull(const Scene& scene, const Eigen::Vector3d& origin,
                double max_range) {
  Candidates c;
  const double jitter = scene.params.car_jitter;
  for (size_t i = 0; i < scene.boxes.size(); ++i) {
    const Box& b = scene.boxes[i];
    const double slack = b.label == SemanticClass::kDynamic ? jitter : 0.0;
    Eigen::Vector3d q = origin.cwiseMax(b.min).cwiseMin(b.max);
    if ((q - origin).norm() <= max_range + slack) c.boxes.push_back(static_cast<int>(i));
  }
  for (size_t i = 0; i < scene.spheres.size(); ++i) {
    const Sphere& s = scene.spheres[i];
    if ((s.center - origin).norm() - s.radius <= max_range) {
      c.spheres.push_back(static_cast<int>(i));
    }
  }
  return c;
}

bool cast_culled(const Scene& scene, const Candidates& cand,
                 const std::vector<Eigen::Vector3d>& offsets,
                 const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                 double max_range, RayHit& hit) {
  double t = max_range;
  bool found = false;
  SemanticClass label = SemanticClass::kOther;
  if (d.z() < 0) {
    const double tg = -o.z() / d.z();
    if (tg > 1e-9 && tg <= t) {
      t = tg;
      found = true;
      label = SemanticClass::kRoad;
    }
  }
  const Eigen::Vector3d inv_d = d.cwiseInverse();
  for (int i : cand.boxes) {
    if (intersect_box(scene.boxes[i], offsets[i], o, inv_d, t)) {
      found = true;
      label = scene.boxes[i].label;
    }
  }
  for (int i : cand.spheres) {
    if (intersect_sphere(scene.spheres[i], o, d, t)) {
      found = true;
      label = scene.spheres[i].label;
    }
  }
  if (!found) return false;
  hit.range = t;
  hit.point = o + t * d;
  hit.label = label;
  return true;
}

std::vector<Eigen::Vector3d> frame_offsets(const Scene& scene,
                                           std::uint64_t frame) {
  std::vector<Eigen::Vector3d> offsets(scene.boxes.size(),
                                       Eigen::Vector3d::Zero());
  for (size_t i = 0; i < scene.boxes.size(); ++i) {
    if (scene.boxes[i].label == SemanticClass::kDynamic) {
      offsets[i] = scene.dynamic_offset(i, frame);
    }
  }
  return offsets;
}

}  // namespace

void ScannerSpec::validate() const {
  if (num_beams < 2) throw std::invalid_argument("scanner: K must be >= 2");
  if (!(elevation_min_deg < elevation_max_deg)) {
    throw std::invalid_argument("scanner: elevation_min must be below elevation_max");
  }
  if (elevation_min_deg <= -90 || elevation_max_deg >= 90) {
    throw std::invalid_argument("scanner: elevations must lie in (-90, 90) degrees");
  }
  if (azimuth_steps < 8) throw std::invalid_argument("scanner: azimuth_steps must be >= 8");
  if (!(max_range > 0)) throw std::invalid_argument("scanner: max_range must be positive");
  if (!(sensor_height > 0)) throw std::invalid_argument("scanner: sensor_height must be positive");
}

double ScannerSpec::beam_elevation(int beam_id) const {
  const double step =
      (elevation_max_deg - elevation_min_deg) / static_cast<double>(num_beams - 1);
  return (elevation_max_deg - step * (beam_id - 1)) * kDeg;
}

Eigen::Isometry3d lift_pose(const Pose2& p, double height) {
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  T.linear() = Eigen::AngleAxisd(p.yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  T.translation() = Eigen::Vector3d(p.x, p.y, height);
  return T;
}

void SceneParams::validate() const {
  if (!(loop_length > 0) || !(loop_width > 0)) {
    throw std::invalid_argument("scene: loop extents must be positive");
  }
  if (!(building_setback >= 4.0)) {
    throw std::invalid_argument("scene: building_setback must be >= 4 m");
  }
  if (std::min(loop_length, loop_width) < 2 * building_setback + 4.0) {
    throw std::invalid_argument("scene: loop too small for the building setback");
  }
  if (!(building_height_min > 0) || building_height_max < building_height_min) {
    throw std::invalid_argument("scene: invalid building height range");
  }
  if (trees_per_100m < 0 || poles_per_100m < 0 || cars_per_100m < 0) {
    throw std::invalid_argument("scene: object densities must be non-negative");
  }
  if (car_jitter < 0) throw std::invalid_argument("scene: car_jitter must be non-negative");
  if (route_poses < 1) throw std::invalid_argument("scene: route_poses must be >= 1");
  if (!(map_pose_spacing > 0)) {
    throw std::invalid_argument("scene: map_pose_spacing must be positive");
  }
}

Eigen::Vector3d Scene::dynamic_offset(size_t index, std::uint64_t frame) const {
  if (frame == 0) return Eigen::Vector3d::Zero();
  const std::uint64_t h =
      splitmix64(splitmix64(params.seed ^ 0xd1ce) ^ splitmix64(index) ^ (frame * 0x9e37));
  const double u = 2.0 * hash_unit(h) - 1.0;
  const Box& b = boxes[index];
  // Cars are elongated along their lane; move them along the long axis.
  const Eigen::Vector3d ext = b.max - b.min;
  Eigen::Vector3d off = Eigen::Vector3d::Zero();
  if (ext.x() >= ext.y()) {
    off.x() = u * params.car_jitter;
  } else {
    off.y() = u * params.car_jitter;
  }
  return off;
}

bool Scene::point_inside_solid(const Eigen::Vector3d& p, std::uint64_t frame) const {
  for (size_t i = 0; i < boxes.size(); ++i) {
    const Eigen::Vector3d off = boxes[i].label == SemanticClass::kDynamic
                                    ? dynamic_offset(i, frame)
                                    : Eigen::Vector3d::Zero();
    if ((p.array() >= (boxes[i].min + off).array()).all() &&
        (p.array() <= (boxes[i].max + off).array()).all()) {
      return true;
    }
  }
  for (const auto& s : spheres) {
    if ((p - s.center).norm() <= s.radius) return true;
  }
  return p.z() <= 0.0;
}

Scene generate_scene(const SceneParams& params) {
  params.validate();
  Scene scene;
  scene.params = params;
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const auto segs = loop_segments(params);
  const double setback = params.building_setback;

  // Buildings: walk both sides of each street with random lots and gaps.
  for (const auto& seg : segs) {
    for (int side : {-1, 1}) {
      double along = uni(-setback, 4.0);
      while (along < seg.length() + setback) {
        const double frontage = uni(8.0, 22.0);
        const double depth = uni(6.0, 16.0);
        const double offset = setback + uni(0.0, 3.0);
        const double height = uni(params.building_height_min, params.building_height_max);
        const Eigen::Vector2d p0 = seg.a + seg.dir() * along + seg.normal() * (side * offset);
        const Eigen::Vector2d p1 = p0 + seg.dir() * frontage + seg.normal() * (side * depth);
        const Eigen::Vector2d lo = p0.cwiseMin(p1), hi = p0.cwiseMax(p1);
        if (route_clearance_rect(segs, lo, hi) >= setback) {
          scene.boxes.push_back({Eigen::Vector3d(lo.x(), lo.y(), 0.0),
                                 Eigen::Vector3d(hi.x(), hi.y(), height),
                                 SemanticClass::kBuilding});
        }
        along += frontage + uni(2.0, 9.0);
      }
    }
  }

  double perimeter = 0;
  for (const auto& s : segs) perimeter += s.length();
  auto count_for = [&](double per100) {
    return static_cast<int>(std::lround(per100 * perimeter / 100.0));
  };
  auto random_spot = [&](double lateral_lo, double lateral_hi, Segment& seg_out,
                         double& along_out) {
    const Segment& seg = segs[static_cast<size_t>(uni(0.0, 4.0)) % 4];
    const double along = uni(6.0, seg.length() - 6.0);
    const int side = unit(rng) < 0.5 ? -1 : 1;
    seg_out = seg;
    along_out = along;
    return Eigen::Vector2d(seg.a + seg.dir() * along +
                           seg.normal() * (side * uni(lateral_lo, lateral_hi)));
  };

  // Trees: crowns on the sidewalk, clear of the sensor path.
  const int trees = count_for(params.trees_per_100m);
  for (int i = 0, attempts = 0; i < trees && attempts < 50 * (trees + 1); ++attempts) {
    Segment seg;
    double along;
    const Eigen::Vector2d c = random_spot(4.0, 5.5, seg, along);
    const double r = uni(1.2, 2.4);
    if (route_clearance_point(segs, c) < r + 0.8) continue;
    scene.spheres.push_back({Eigen::Vector3d(c.x(), c.y(), uni(3.2, 5.0)), r,
                             SemanticClass::kVegetation});
    // Trunk.
    scene.boxes.push_back({Eigen::Vector3d(c.x() - 0.15, c.y() - 0.15, 0.0),
                           Eigen::Vector3d(c.x() + 0.15, c.y() + 0.15, 3.0),
                           SemanticClass::kVegetation});
    ++i;
  }

  // Poles and small street furniture.
  const int poles = count_for(params.poles_per_100m);
  for (int i = 0, attempts = 0; i < poles && attempts < 50 * (poles + 1); ++attempts) {
    Segment seg;
    double along;
    const Eigen::Vector2d c = random_spot(3.8, 5.0, seg, along);
    if (route_clearance_point(segs, c) < 3.0) continue;
    const double w = 0.15;
    scene.boxes.push_back({Eigen::Vector3d(c.x() - w, c.y() - w, 0.0),
                           Eigen::Vector3d(c.x() + w, c.y() + w, uni(4.0, 8.0)),
                           SemanticClass::kOther});
    ++i;
  }

  // Cars parked beside the lane.
  const int cars = count_for(params.cars_per_100m);
  for (int i = 0, attempts = 0; i < cars && attempts < 50 * (cars + 1); ++attempts) {
    Segment seg;
    double along;
    const Eigen::Vector2d c = random_spot(2.4, 3.2, seg, along);
    if (along < 8.0 + params.car_jitter || along > seg.length() - 8.0 - params.car_jitter) {
      continue;
    }
    const Eigen::Vector2d half_along = seg.dir() * 2.25;
    const Eigen::Vector2d half_across = seg.normal() * 0.95;
    const Eigen::Vector2d a = c - half_along - half_across;
    const Eigen::Vector2d b = c + half_along + half_across;
    const Eigen::Vector2d lo = a.cwiseMin(b), hi = a.cwiseMax(b);
    scene.boxes.push_back({Eigen::Vector3d(lo.x(), lo.y(), 0.0),
                           Eigen::Vector3d(hi.x(), hi.y(), uni(1.4, 1.7)),
                           SemanticClass::kDynamic});
    ++i;
  }

  scene.route = sample_loop(segs, params.route_poses, 0.0, 0.0);
  const int map_count = std::max(1, static_cast<int>(perimeter / params.map_pose_spacing));
  scene.map_route = sample_loop(segs, map_count, 0.5, 0.4);

  for (size_t i = 0; i < scene.route.size(); ++i) {
    const Pose2& p = scene.route[i];
    // Route pose i is scanned with frame i + 1.
    const Eigen::Vector3d origin(p.x, p.y, 1.0);
    if (scene.point_inside_solid(origin, 0) || scene.point_inside_solid(origin, i + 1)) {
      throw std::logic_error("generated route pose inside a solid");
    }
  }
  return scene;
}

bool cast_ray(const Scene& scene, const Eigen::Vector3d& origin,
              const Eigen::Vector3d& direction, double max_range,
              std::uint64_t frame, RayHit& hit) {
  const Candidates cand = cull(scene, origin, max_range);
  return cast_culled(scene, cand, frame_offsets(scene, frame), origin,
                     direction.normalized(), max_range, hit);
}

LabeledPointCloud scan(const Scene& scene, const Eigen::Isometry3d& pose,
                       const ScannerSpec& spec, std::uint64_t frame) {
  spec.validate();
  LabeledPointCloud cloud;
  cloud.pose = pose;
  const Eigen::Vector3d origin = pose.translation();
  const Eigen::Matrix3d R = pose.linear();
  const Candidates cand = cull(scene, origin, spec.max_range);
  const auto offsets = frame_offsets(scene, frame);

  std::vector<double> cos_az(static_cast<size_t>(spec.azimuth_steps));
  std::vector<double> sin_az(cos_az.size());
  for (int j = 0; j < spec.azimuth_steps; ++j) {
    const double a = 2.0 * std::numbers::pi * j / spec.azimuth_steps;
    cos_az[j] = std::cos(a);
    sin_az[j] = std::sin(a);
  }
  cloud.points.reserve(static_cast<size_t>(spec.num_beams) * cos_az.size());
  RayHit hit;
  for (int beam = 1; beam <= spec.num_beams; ++beam) {
    const double el = spec.beam_elevation(beam);
    const double ce = std::cos(el), se = std::sin(el);
    for (int j = 0; j < spec.azimuth_steps; ++j) {
      const Eigen::Vector3d d_sensor(ce * cos_az[j], ce * sin_az[j], se);
      const Eigen::Vector3d d_world = R * d_sensor;
      if (cast_culled(scene, cand, offsets, origin, d_world, spec.max_range, hit)) {
        cloud.points.push_back({d_sensor * hit.range, hit.label, beam});
      }
    }
  }
  return cloud;
}

LabeledPointCloud subsample_beams(const LabeledPointCloud& cloud,
                                  std::span<const int> beams) {
  LabeledPointCloud out;
  out.pose = cloud.pose;
  for (const auto& p : cloud.points) {
    if (std::find(beams.begin(), beams.end(), p.beam_id) != beams.end()) {
      out.points.push_back(p);
    }
  }
  return out;
}

LabeledPointCloud subsample_beams(const LabeledPointCloud& cloud,
                                  const BeamConfig& s) {
  return subsample_beams(cloud, std::span<const int>(s.ids()));
}

MapCloud voxel_thin(const MapCloud& cloud, double voxel) {
  struct KeyHash {
    size_t operator()(const Eigen::Vector3i& k) const {
      return static_cast<size_t>(k.x()) * 73856093u ^
             static_cast<size_t>(k.y()) * 19349663u ^
             static_cast<size_t>(k.z()) * 83492791u;
    }
  };
  struct KeyEq {
    bool operator()(const Eigen::Vector3i& a, const Eigen::Vector3i& b) const {
      return a == b;
    }
  };
  std::unordered_set<Eigen::Vector3i, KeyHash, KeyEq> seen;
  seen.reserve(cloud.size());
  MapCloud out;
  for (size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3i key = (cloud.points[i] / voxel).array().floor().cast<int>();
    if (seen.insert(key).second) {
      out.points.push_back(cloud.points[i]);
      out.labels.push_back(cloud.labels[i]);
    }
  }
  return out;
}

MapCloud build_map(const Scene& scene, std::span<const Pose2> poses,
                   const ScannerSpec& spec, double voxel) {
  MapCloud raw;
  for (const auto& p : poses) {
    const LabeledPointCloud c = scan(scene, lift_pose(p, spec.sensor_height), spec, 0);
    for (const auto& pt : c.points) {
      if (pt.label == SemanticClass::kDynamic) continue;
      raw.points.push_back(c.pose * pt.xyz);
      raw.labels.push_back(pt.label);
    }
  }
  return voxel_thin(raw, voxel);
}

}  // namespace beamopt
