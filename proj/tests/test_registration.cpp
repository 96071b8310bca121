#include "beamopt/kdtree.hpp"
#include "beamopt/registration.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace beamopt;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<Eigen::Vector3d> random_points(int n, std::uint64_t seed, double extent = 10) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Eigen::Vector3d> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

double angle_between_lines(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::acos(std::min(1.0, std::abs(a.normalized().dot(b.normalized())))) / kDeg;
}

// Small walled courtyard used as a registration map and as the scan source.
struct Courtyard {
  Scene scene;
  ScannerSpec spec;
  MapCloud map;
  NormalMap normals;
  std::unique_ptr<RegistrationMap> reg;

  Courtyard() {
    scene.boxes.push_back({{-20, -22, 0}, {20, -18, 8}, SemanticClass::kBuilding});
    scene.boxes.push_back({{-20, 18, 0}, {20, 22, 12}, SemanticClass::kBuilding});
    scene.boxes.push_back({{22, -20, 0}, {26, 20, 6}, SemanticClass::kBuilding});
    scene.boxes.push_back({{-8, 5, 0}, {-4, 9, 3}, SemanticClass::kOther});
    scene.spheres.push_back({{6, -8, 2}, 1.5, SemanticClass::kVegetation});
    spec.num_beams = 16;
    spec.azimuth_steps = 360;
    std::vector<Pose2> poses;
    for (double x = -12; x <= 12; x += 3) poses.push_back({x, 0, 0});
    map = build_map(scene, poses, spec, 0.1);
    normals = estimate_normals(map.points, 10);
    reg = std::make_unique<RegistrationMap>(map, normals);
  }

  std::vector<Eigen::Vector3d> scan_points(const Eigen::Isometry3d& pose) const {
    std::vector<Eigen::Vector3d> pts;
    for (const auto& p : scan(scene, pose, spec).points) pts.push_back(p.xyz);
    return pts;
  }
};

const Courtyard& courtyard() {
  static const Courtyard c;
  return c;
}

}  // namespace

TEST(KdTree, NearestMatchesBruteForce) {
  const auto pts = random_points(3000, 1);
  const KdTree3 tree(&pts);
  EXPECT_EQ(tree.size(), pts.size());
  for (const auto& q : random_points(300, 2, 12)) {
    int best = -1;
    double bd = 1e300;
    for (size_t i = 0; i < pts.size(); ++i) {
      const double d = (pts[i] - q).squaredNorm();
      if (d < bd) {
        bd = d;
        best = static_cast<int>(i);
      }
    }
    EXPECT_EQ(tree.nearest(q, 100.0), best);
    EXPECT_EQ(tree.nearest(q, std::sqrt(bd) * 0.999), -1);
  }
}

TEST(KdTree, KnnMatchesBruteForce) {
  const auto pts = random_points(1500, 3);
  const KdTree3 tree(&pts);
  for (const auto& q : random_points(50, 4)) {
    std::vector<int> idx(pts.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::partial_sort(idx.begin(), idx.begin() + 8, idx.end(), [&](int a, int b) {
      return (pts[a] - q).squaredNorm() < (pts[b] - q).squaredNorm();
    });
    idx.resize(8);
    EXPECT_EQ(tree.knn(q, 8), idx);
  }
}

TEST(KdTree, EmptyTree) {
  const std::vector<Eigen::Vector3d> none;
  const KdTree3 tree(&none);
  EXPECT_EQ(tree.nearest({0, 0, 0}, 10), -1);
  EXPECT_TRUE(tree.knn({0, 0, 0}, 3).empty());
}

TEST(Normals, PlanarPatchOracle) {
  const Eigen::Vector3d n_true = Eigen::Vector3d(0.2, -0.3, 1.0).normalized();
  const Eigen::Vector3d u = n_true.unitOrthogonal(), v = n_true.cross(u);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> s(-3, 3);
  std::vector<Eigen::Vector3d> pts;
  for (int i = 0; i < 800; ++i) pts.push_back(Eigen::Vector3d(1, 2, 3) + s(rng) * u + s(rng) * v);
  const NormalMap nm = estimate_normals(pts, 10);
  for (size_t i = 0; i < pts.size(); ++i) {
    ASSERT_TRUE(nm.valid[i]);
    EXPECT_NEAR(nm.normals[i].norm(), 1.0, 1e-9);
    EXPECT_LT(angle_between_lines(nm.normals[i], n_true), 1.0);
    EXPECT_GE(nm.normals[i].z(), 0.0);
  }
}

TEST(Normals, SpherePatchOracle) {
  const Eigen::Vector3d c(4, -2, 1);
  const double r = 5.0;
  std::vector<Eigen::Vector3d> pts;
  // Fibonacci lattice: near-uniform density, restricted to the upper cap.
  const int n = 6000;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    if (z < 0.3) continue;
    const double rho = std::sqrt(1.0 - z * z);
    pts.push_back(c + r * Eigen::Vector3d(rho * std::cos(golden * i), rho * std::sin(golden * i), z));
  }
  const NormalMap nm = estimate_normals(pts, 10);
  for (size_t i = 0; i < pts.size(); ++i) {
    ASSERT_TRUE(nm.valid[i]);
    EXPECT_NEAR(nm.normals[i].norm(), 1.0, 1e-9);
    EXPECT_LT(angle_between_lines(nm.normals[i], pts[i] - c), 5.0);
  }
}

TEST(Normals, CollinearNeighborhoodInvalid) {
  std::vector<Eigen::Vector3d> line;
  for (int i = 0; i < 30; ++i) line.push_back({0.1 * i, 0, 0});
  const NormalMap nm = estimate_normals(line, 10);
  for (auto v : nm.valid) EXPECT_FALSE(v);
}

TEST(PoseError, ClosedForms) {
  Eigen::Isometry3d gt = Eigen::Isometry3d::Identity();
  gt.translation() = Eigen::Vector3d(3, 4, 1);
  gt.linear() = Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  PoseError e = pose_error(gt, gt);
  EXPECT_NEAR(e.translation, 0.0, 1e-12);
  EXPECT_NEAR(e.rotation_deg, 0.0, 1e-6);

  Eigen::Isometry3d est = gt;
  est.translation().x() += 1.0;
  e = pose_error(est, gt);
  EXPECT_NEAR(e.translation, 1.0, 1e-12);
  EXPECT_NEAR(e.rotation_deg, 0.0, 1e-6);

  est = gt;
  est.linear() = gt.linear() * Eigen::AngleAxisd(10 * kDeg, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  e = pose_error(est, gt);
  EXPECT_NEAR(e.translation, 0.0, 1e-12);
  EXPECT_NEAR(e.rotation_deg, 10.0, 1e-9);
}

TEST(Icp, FixedPointFromGroundTruth) {
  const Courtyard& c = courtyard();
  for (double x : {-9.0, -1.5, 4.0, 10.0}) {
    const Eigen::Isometry3d gt = lift_pose({x, 0.7, 0.2}, c.spec.sensor_height);
    const auto pts = c.scan_points(gt);
    const IcpResult r = icp_point_to_plane(pts, *c.reg, gt, IcpParams{});
    ASSERT_TRUE(r.ok);
    const PoseError e = pose_error(r.pose, gt);
    EXPECT_LT(e.translation, 1e-3) << x;
    EXPECT_LT(e.rotation_deg, 0.01) << x;
  }
}

TEST(Icp, RecoversPerturbedPose) {
  const Courtyard& c = courtyard();
  const Eigen::Isometry3d gt = lift_pose({2.0, -1.0, 0.1}, c.spec.sensor_height);
  const Eigen::Isometry3d init = lift_pose({3.2, -0.1, 0.1 + 4 * kDeg}, c.spec.sensor_height);
  const auto pts = c.scan_points(gt);
  const IcpResult r = icp_point_to_plane(pts, *c.reg, init, IcpParams{});
  ASSERT_TRUE(r.ok);
  const PoseError e = pose_error(r.pose, gt);
  EXPECT_LT(e.translation, 0.05);
  EXPECT_LT(e.rotation_deg, 0.5);
  EXPECT_LE(r.residual, r.initial_residual);
  EXPECT_TRUE(r.pose.linear().isUnitary(1e-9));
}

TEST(Icp, EmptyOverlapReportsFailure) {
  const Courtyard& c = courtyard();
  const auto pts = c.scan_points(lift_pose({0, 0, 0}, c.spec.sensor_height));
  const Eigen::Isometry3d far = lift_pose({5000, 5000, 0}, c.spec.sensor_height);
  const IcpResult r = icp_point_to_plane(pts, *c.reg, far, IcpParams{});
  EXPECT_FALSE(r.ok);
  EXPECT_TRUE(r.pose.isApprox(far));
  EXPECT_TRUE(std::isinf(r.residual));
}

TEST(Icp, EmptyScanReportsFailure) {
  const std::vector<Eigen::Vector3d> none;
  const IcpResult r = icp_point_to_plane(none, *courtyard().reg, Eigen::Isometry3d::Identity(),
                                         IcpParams{});
  EXPECT_FALSE(r.ok);
}

TEST(IcpParams, Validation) {
  IcpParams p;
  p.gate_decay = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = IcpParams{};
  p.initial_correspondence_distance = 0.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = IcpParams{};
  p.max_iterations = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}
