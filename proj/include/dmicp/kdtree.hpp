// Exact nearest-neighbor index over a fixed point set. All queries are
// deterministic: equal distances are broken by the lower point index, so
// results do not depend on traversal order.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

#include "dmicp/core.hpp"
#include "dmicp/point_cloud.hpp"

namespace dmicp {

class KdIndex {
 public:
  explicit KdIndex(const PointCloud& cloud) : pts_(cloud.points) {
    order_.resize(pts_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!pts_.empty()) {
      nodes_.reserve(2 * pts_.size() / kLeafSize + 2);
      root_ = build(0, static_cast<int>(pts_.size()));
    }
  }

  std::size_t size() const { return pts_.size(); }

  /// Exact nearest neighbor; returns (index, Euclidean distance).
  std::pair<int, double> nearest(const Vec3& query) const {
    if (pts_.empty()) throw EmptyIndex("KdIndex::nearest: index is empty");
    int best_idx = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    search_one(root_, query, best_idx, best_d2);
    return {best_idx, std::sqrt(best_d2)};
  }

  /// Exact k nearest neighbors, sorted by (distance, index) ascending.
  /// Returns fewer than k entries only when the index holds fewer points.
  std::vector<std::pair<int, double>> knn(const Vec3& query, int k) const {
    if (pts_.empty()) throw EmptyIndex("KdIndex::knn: index is empty");
    if (k <= 0) return {};
    Heap heap;
    search_k(root_, query, static_cast<std::size_t>(k), heap);
    std::vector<std::pair<int, double>> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
      out.emplace_back(heap.top().second, std::sqrt(heap.top().first));
      heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  static constexpr int kLeafSize = 16;

  struct Node {
    double split = 0.0;
    int dim = -1;            // -1 marks a leaf
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf span in order_
  };

  // Worst entry on top: larger distance first, larger index on ties.
  using HeapEntry = std::pair<double, int>;  // (distance^2, index)
  struct Worse {
    bool operator()(const HeapEntry& a, const HeapEntry& b) const {
      if (a.first != b.first) return a.first < b.first;
      return a.second < b.second;
    }
  };
  using Heap = std::priority_queue<HeapEntry, std::vector<HeapEntry>, Worse>;

  int build(int begin, int end) {
    Node node;
    if (end - begin <= kLeafSize) {
      node.begin = begin;
      node.end = end;
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size()) - 1;
    }
    Vec3 lo = pts_[order_[begin]], hi = lo;
    for (int i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(pts_[order_[i]]);
      hi = hi.cwiseMax(pts_[order_[i]]);
    }
    int dim = 0;
    (hi - lo).maxCoeff(&dim);
    int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](int a, int b) {
                       double ca = pts_[a](dim), cb = pts_[b](dim);
                       if (ca != cb) return ca < cb;
                       return a < b;
                     });
    node.dim = dim;
    node.split = pts_[order_[mid]](dim);
    int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    int left = build(begin, mid);
    int right = build(mid, end);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  void search_one(int ni, const Vec3& q, int& best_idx, double& best_d2) const {
    const Node& node = nodes_[ni];
    if (node.dim < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        int idx = order_[i];
        double d2 = (pts_[idx] - q).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
          best_d2 = d2;
          best_idx = idx;
        }
      }
      return;
    }
    double diff = q(node.dim) - node.split;
    int near = diff < 0.0 ? node.left : node.right;
    int far = diff < 0.0 ? node.right : node.left;
    search_one(near, q, best_idx, best_d2);
    // <= so equal-distance candidates across the plane are still visited and
    // the lowest index wins.
    if (diff * diff <= best_d2) search_one(far, q, best_idx, best_d2);
  }

  void search_k(int ni, const Vec3& q, std::size_t k, Heap& heap) const {
    const Node& node = nodes_[ni];
    if (node.dim < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        int idx = order_[i];
        double d2 = (pts_[idx] - q).squaredNorm();
        HeapEntry entry{d2, idx};
        if (heap.size() < k) {
          heap.push(entry);
        } else if (Worse{}(entry, heap.top())) {
          heap.pop();
          heap.push(entry);
        }
      }
      return;
    }
    double diff = q(node.dim) - node.split;
    int near = diff < 0.0 ? node.left : node.right;
    int far = diff < 0.0 ? node.right : node.left;
    search_k(near, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.top().first) {
      search_k(far, q, k, heap);
    }
  }

  std::vector<Vec3> pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace dmicp
