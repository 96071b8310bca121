#include "beamopt/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

namespace beamopt {

namespace {
constexpr int kLeafSize = 12;
}

KdTree3::KdTree3(const std::vector<Eigen::Vector3d>* points) : points_(points) {
  order_.resize(points->size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points->size() / kLeafSize + 1);
  if (!order_.empty()) build(0, static_cast<int>(order_.size()));
  sorted_.reserve(order_.size());
  for (int i : order_) sorted_.push_back((*points)[static_cast<size_t>(i)]);
  points_ = nullptr;
}

int KdTree3::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  const auto& pts = *points_;
  Eigen::Vector3d lo = pts[order_[begin]], hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(pts[order_[i]]);
    hi = hi.cwiseMax(pts[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return pts[a][axis] < pts[b][axis]; });
  const double split = pts[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& n = nodes_[id];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

int KdTree3::nearest(const Eigen::Vector3d& q, double max_dist) const {
  if (nodes_.empty()) return -1;
  double best_d2 = max_dist * max_dist;
  int best = -1;
  // (node, squared distance lower bound)
  struct Item {
    int node;
    double bound;
  };
  Item stack[128];
  int top = 0;
  stack[top++] = {0, 0.0};
  while (top > 0) {
    const Item it = stack[--top];
    if (it.bound > best_d2) continue;
    const Node& n = nodes_[it.node];
    if (n.axis < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const double d2 = (sorted_[static_cast<size_t>(i)] - q).squaredNorm();
        if (d2 <= best_d2) {
          best_d2 = d2;
          best = order_[i];
        }
      }
      continue;
    }
    const double diff = q[n.axis] - n.split;
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    if (diff * diff <= best_d2) stack[top++] = {far, diff * diff};
    stack[top++] = {near, 0.0};
  }
  return best;
}

std::vector<int> KdTree3::knn(const Eigen::Vector3d& q, int k) const {
  std::vector<int> out;
  if (nodes_.empty() || k <= 0) return out;
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry> heap;  // max-heap of the current best k
  auto worst = [&] {
    return static_cast<int>(heap.size()) < k ? std::numeric_limits<double>::infinity()
                                             : heap.top().first;
  };
  struct Item {
    int node;
    double bound;
  };
  std::vector<Item> stack;
  stack.push_back({0, 0.0});
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    if (it.bound > worst()) continue;
    const Node& n = nodes_[it.node];
    if (n.axis < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const double d2 = (sorted_[static_cast<size_t>(i)] - q).squaredNorm();
        if (static_cast<int>(heap.size()) < k) {
          heap.emplace(d2, order_[i]);
        } else if (d2 < heap.top().first) {
          heap.pop();
          heap.emplace(d2, order_[i]);
        }
      }
      continue;
    }
    const double diff = q[n.axis] - n.split;
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    stack.push_back({far, diff * diff});
    stack.push_back({near, 0.0});
  }
  out.resize(heap.size());
  for (int i = static_cast<int>(heap.size()) - 1; i >= 0; --i) {
    out[i] = heap.top().second;
    heap.pop();
  }
  return out;
}

}  // namespace beamopt
