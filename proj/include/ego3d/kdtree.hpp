#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace ego3d {

/// Static 3D kd-tree for nearest-neighbor queries. Median split, points
/// stored once at build time.
class KdTree3 {
 public:
  explicit KdTree3(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!points_.empty()) root_ = build(0, points_.size(), 0);
  }

  bool empty() const { return points_.empty(); }

  /// Index of the closest stored point and its squared distance.
  std::pair<std::size_t, double> nearest(const Eigen::Vector3d& q) const {
    std::size_t best = order_[0];
    double best_d2 = std::numeric_limits<double>::infinity();
    search(root_, 0, points_.size(), 0, q, best, best_d2);
    return {best, best_d2};
  }

  double nearest_distance(const Eigen::Vector3d& q) const {
    return std::sqrt(nearest(q).second);
  }

 private:
  // Nodes are implicit: [lo, hi) ranges over order_, split point at the median.
  std::size_t build(std::size_t lo, std::size_t hi, int axis) {
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::size_t a, std::size_t b) {
                       return points_[a](axis) < points_[b](axis);
                     });
    if (mid > lo) build(lo, mid, (axis + 1) % 3);
    if (hi > mid + 1) build(mid + 1, hi, (axis + 1) % 3);
    return mid;
  }

  void search(std::size_t, std::size_t lo, std::size_t hi, int axis,
              const Eigen::Vector3d& q, std::size_t& best, double& best_d2) const {
    if (lo >= hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::size_t idx = order_[mid];
    const double d2 = (points_[idx] - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = idx;
    }
    const double plane_delta = q(axis) - points_[idx](axis);
    const int next = (axis + 1) % 3;
    if (plane_delta < 0.0) {
      search(mid, lo, mid, next, q, best, best_d2);
      if (plane_delta * plane_delta < best_d2) search(mid, mid + 1, hi, next, q, best, best_d2);
    } else {
      search(mid, mid + 1, hi, next, q, best, best_d2);
      if (plane_delta * plane_delta < best_d2) search(mid, lo, mid, next, q, best, best_d2);
    }
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::size_t> order_;
  std::size_t root_ = 0;
};

}  // namespace ego3d
