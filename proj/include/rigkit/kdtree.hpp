#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "rigkit/errors.hpp"
#include "rigkit/point_cloud.hpp"

namespace rigkit::registration {

// Static kd-tree over a fixed point set, median split on the widest axis.
// nearest() returns exactly what a linear scan would: the minimum distance,
// and among equidistant points the lowest original index. To keep that
// guarantee the search only prunes subtrees whose slab distance is strictly
// greater than the current best, so equidistant candidates are always visited.
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  struct Result {
    std::size_t index = 0;
    double distance = 0.0;
  };

  explicit KdTree(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.empty()) throw EmptyInput("KdTree: no points");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    root_ = build(0, points_.size());
  }

  std::size_t size() const { return points_.size(); }
  const Point& point(std::size_t i) const { return points_[i]; }

  Result nearest(const Point& query) const {
    double best_d2 = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    search(root_, query, best_d2, best_idx);
    return {best_idx, std::sqrt(best_d2)};
  }

 private:
  static constexpr std::size_t kLeafSize = 16;

  struct Node {
    double split = 0.0;
    int axis = 0;
    int left = -1;
    int right = -1;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  int build(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    if (end - begin <= kLeafSize) return id;

    Point lo = points_[order_[begin]];
    Point hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return id;  // all points coincide on every axis

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](std::size_t a, std::size_t b) {
                       const double ca = points_[a][axis];
                       const double cb = points_[b][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    nodes_[id].axis = axis;
    nodes_[id].split = points_[order_[mid]][axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void scan(const Node& node, const Point& query, double& best_d2,
            std::size_t& best_idx) const {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const double d2 = (points_[idx] - query).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
        best_d2 = d2;
        best_idx = idx;
      }
    }
  }

  void search(int id, const Point& query, double& best_d2,
              std::size_t& best_idx) const {
    const Node& node = nodes_[id];
    if (node.left < 0) {
      scan(node, query, best_d2, best_idx);
      return;
    }
    const double diff = query[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    search(near, query, best_d2, best_idx);
    if (diff * diff > best_d2) return;
    search(far, query, best_d2, best_idx);
  }

  std::vector<Point> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = 0;
};

inline KdTree<3> build_kdtree(const PointCloud& cloud) {
  return KdTree<3>(cloud.points);
}

}  // namespace rigkit::registration
