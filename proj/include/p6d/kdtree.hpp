#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "p6d/error.hpp"
#include "p6d/geometry.hpp"

namespace p6d {

/// Exact nearest-neighbour index over a fixed point set.
///
/// Median-split k-d tree with buckets of at most kLeafSize points. Queries
/// return the same distances as a linear scan.
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;
  static constexpr std::size_t kLeafSize = 16;

  explicit KdTree(std::span<const Point> points)
      : points_(points.begin(), points.end()) {
    if (points_.empty()) throw_data("empty reference set");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }

  std::size_t size() const { return points_.size(); }

  /// Squared distance to the nearest reference point and its index.
  std::pair<double, std::size_t> nearest(const Point& q) const {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    search(0, q, best, best_idx);
    return {best, best_idx};
  }

 private:
  struct Node {
    std::uint32_t begin, end;  // range in order_
    std::int32_t left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Point lo = points_[order_[begin]], hi = lo;
    for (auto i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return points_[a][axis] < points_[b][axis];
                     });
    const double split = points_[order_[mid]][axis];
    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    Node& n = nodes_[static_cast<std::size_t>(id)];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
  }

  void search(std::int32_t id, const Point& q, double& best, std::size_t& best_idx) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.left < 0) {
      for (auto i = n.begin; i < n.end; ++i) {
        const double d = (points_[order_[i]] - q).squaredNorm();
        if (d < best || (d == best && order_[i] < best_idx)) {
          best = d;
          best_idx = order_[i];
        }
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const auto near = diff < 0.0 ? n.left : n.right;
    const auto far = diff < 0.0 ? n.right : n.left;
    search(near, q, best, best_idx);
    if (diff * diff <= best) search(far, q, best, best_idx);
  }

  std::vector<Point> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Euclidean distance from each query to its nearest reference point.
std::vector<double> nearest_distances(std::span<const Vec3> queries,
                                      std::span<const Vec3> references);
std::vector<double> nearest_distances(std::span<const Vec2> queries,
                                      std::span<const Vec2> references);

}  // namespace p6d
