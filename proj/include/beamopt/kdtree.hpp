#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace beamopt {

/// Static 3D kd-tree over a point array. Returned indices refer to the
/// caller's array; the tree keeps its own leaf-ordered copy of the points.
class KdTree3 {
 public:
  KdTree3() = default;
  explicit KdTree3(const std::vector<Eigen::Vector3d>* points);

  /// Index of the nearest point within `max_dist`, or -1.
  int nearest(const Eigen::Vector3d& q, double max_dist) const;

  /// The k nearest points, closest first.
  std::vector<int> knn(const Eigen::Vector3d& q, int k) const;

  size_t size() const { return order_.size(); }

 private:
  struct Node {
    int begin = 0;
    int end = 0;  // leaf range into order_ when axis < 0
    int left = -1;
    int right = -1;
    int axis = -1;
    double split = 0;
  };

  int build(int begin, int end);

  const std::vector<Eigen::Vector3d>* points_ = nullptr;  // only during build
  std::vector<int> order_;
  std::vector<Eigen::Vector3d> sorted_;  // points in order_ sequence
  std::vector<Node> nodes_;
};

}  // namespace beamopt
