#include "beamopt/registration.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace beamopt {

void IcpParams::validate() const {
  if (max_iterations < 1) throw std::invalid_argument("icp: max_iterations must be >= 1");
  if (!(translation_tolerance > 0) || !(rotation_tolerance > 0)) {
    throw std::invalid_argument("icp: tolerances must be positive");
  }
  if (!(max_correspondence_distance > 0)) {
    throw std::invalid_argument("icp: correspondence distance must be positive");
  }
  if (initial_correspondence_distance < max_correspondence_distance) {
    throw std::invalid_argument(
        "icp: initial correspondence distance must be >= the final distance");
  }
  if (!(gate_decay > 0) || !(gate_decay < 1)) {
    throw std::invalid_argument("icp: gate_decay must lie in (0, 1)");
  }
  if (!(robust_scale >= 0)) throw std::invalid_argument("icp: robust_scale must be >= 0");
  if (robust_scale > 0 ? !(initial_robust_scale >= robust_scale) : initial_robust_scale != 0) {
    throw std::invalid_argument(
        "icp: initial_robust_scale must be >= robust_scale (both 0 to disable)");
  }
  if (normal_neighbors < 3) throw std::invalid_argument("icp: normal_neighbors must be >= 3");
}

NormalMap estimate_normals(const std::vector<Eigen::Vector3d>& points, int neighbors) {
  if (static_cast<int>(points.size()) < neighbors + 1) {
    throw std::invalid_argument("estimate_normals: need more than " +
                                std::to_string(neighbors) + " points");
  }
  KdTree3 tree(&points);
  NormalMap out;
  out.normals.resize(points.size(), Eigen::Vector3d::UnitZ());
  out.valid.resize(points.size(), 0);
  const Eigen::Vector3d orient(0.001, 0.01, 1.0);
  for (size_t i = 0; i < points.size(); ++i) {
    const std::vector<int> nn = tree.knn(points[i], neighbors);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int j : nn) mean += points[j];
    mean /= static_cast<double>(nn.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int j : nn) {
      const Eigen::Vector3d d = points[j] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d ev = eig.eigenvalues();  // ascending
    // A line (or a single repeated point) leaves the plane undetermined.
    if (!(ev(2) > 0) || ev(1) < 1e-3 * ev(2)) continue;
    Eigen::Vector3d n = eig.eigenvectors().col(0).normalized();
    if (n.dot(orient) < 0) n = -n;
    out.normals[i] = n;
    out.valid[i] = 1;
  }
  return out;
}

RegistrationMap::RegistrationMap(const MapCloud& map, const NormalMap& normals) {
  if (normals.normals.size() != map.size() || normals.valid.size() != map.size()) {
    throw std::invalid_argument("registration map: normals do not match the map");
  }
  for (size_t i = 0; i < map.size(); ++i) {
    if (!normals.valid[i]) continue;
    points_.push_back(map.points[i]);
    normals_.push_back(normals.normals[i]);
  }
  tree_ = KdTree3(&points_);
}

namespace {

struct Accumulated {
  Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
  double sum_sq = 0;
  int count = 0;
};

Accumulated accumulate(std::span<const Eigen::Vector3d> scan, const RegistrationMap& map,
                       const Eigen::Isometry3d& T, double gate, double robust_scale,
                       bool with_system) {
  Accumulated acc;
  const auto& mp = map.points();
  const auto& mn = map.normals();
  for (const auto& p : scan) {
    const Eigen::Vector3d q = T * p;
    const int idx = map.nearest(q, gate);
    if (idx < 0) continue;
    const Eigen::Vector3d& n = mn[static_cast<size_t>(idx)];
    const double r = n.dot(q - mp[static_cast<size_t>(idx)]);
    acc.sum_sq += r * r;
    ++acc.count;
    if (with_system) {
      Eigen::Matrix<double, 6, 1> J;
      J.head<3>() = q.cross(n);
      J.tail<3>() = n;
      const double w = robust_scale > 0 ? 1.0 / (1.0 + (r / robust_scale) * (r / robust_scale)) : 1.0;
      acc.A.selfadjointView<Eigen::Upper>().rankUpdate(J, w);
      acc.b += w * r * J;
    }
  }
  acc.A = acc.A.selfadjointView<Eigen::Upper>();
  return acc;
}

}  // namespace

IcpResult icp_point_to_plane(std::span<const Eigen::Vector3d> scan, const RegistrationMap& map,
                             const Eigen::Isometry3d& init, const IcpParams& params) {
  IcpResult res;
  res.pose = init;
  const double final_gate = params.max_correspondence_distance;
  {
    const Accumulated a0 = accumulate(scan, map, init, final_gate, 0.0, false);
    if (a0.count >= kMinCorrespondences) res.initial_residual = a0.sum_sq / a0.count;
  }
  Eigen::Isometry3d T = init;
  double gate = params.initial_correspondence_distance;
  double kernel = params.initial_robust_scale;
  for (int it = 0; it < params.max_iterations; ++it) {
    const Accumulated a = accumulate(scan, map, T, gate, kernel, true);
    res.iterations = it + 1;
    if (a.count < kMinCorrespondences) {
      res.pose = init;
      res.ok = false;
      res.residual = std::numeric_limits<double>::infinity();
      res.correspondences = a.count;
      return res;
    }
    Eigen::Matrix<double, 6, 6> A = a.A;
    const double damping = 1e-9 * std::max(1.0, A.trace() / 6.0);
    A.diagonal().array() += damping;
    const Eigen::Matrix<double, 6, 1> delta = -A.ldlt().solve(a.b);
    if (!delta.allFinite()) break;
    const Eigen::Vector3d w = delta.head<3>();
    const Eigen::Vector3d t = delta.tail<3>();
    Eigen::Isometry3d step = Eigen::Isometry3d::Identity();
    const double angle = w.norm();
    if (angle > 0) step.linear() = Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
    step.translation() = t;
    T = step * T;
    const bool settled = gate <= final_gate && kernel <= params.robust_scale;
    gate = std::max(final_gate, gate * params.gate_decay);
    kernel = std::max(params.robust_scale, kernel * params.gate_decay);
    if (settled && t.norm() < params.translation_tolerance &&
        angle < params.rotation_tolerance) {
      res.converged = true;
      break;
    }
  }
  const Accumulated fin = accumulate(scan, map, T, final_gate, 0.0, false);
  res.correspondences = fin.count;
  if (fin.count < kMinCorrespondences) {
    res.pose = init;
    res.ok = false;
    res.residual = std::numeric_limits<double>::infinity();
    return res;
  }
  // Keep the orthonormality of the rotation after many compositions.
  const Eigen::Quaterniond q(T.linear());
  T.linear() = q.normalized().toRotationMatrix();
  res.pose = T;
  res.residual = fin.sum_sq / fin.count;
  res.ok = true;
  return res;
}

PoseError pose_error(const Eigen::Isometry3d& est, const Eigen::Isometry3d& gt) {
  PoseError e;
  e.translation = (est.translation() - gt.translation()).norm();
  const Eigen::Matrix3d rel = est.linear().transpose() * gt.linear();
  e.rotation_deg = Eigen::AngleAxisd(rel).angle() * 180.0 / std::numbers::pi;
  return e;
}

}  // namespace beamopt
