#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dmicp/core.hpp"
#include "dmicp/kdtree.hpp"
#include "dmicp/linalg.hpp"
#include "dmicp/point_cloud.hpp"

namespace dmicp {

/// Nearest-neighbor pairs. `source_pts` are stored already transformed by
/// the matching prior (map frame), so downstream linearization needs no
/// extra bookkeeping.
struct CorrespondenceSet {
  std::vector<Vec3> source_pts;
  std::vector<Vec3> ref_pts;
  std::vector<Vec3> ref_normals;
  std::vector<double> distances;
  std::vector<int> ref_indices;

  std::size_t size() const { return source_pts.size(); }
  bool empty() const { return source_pts.empty(); }
};

/// Matches every source point (transformed by `prior`) to its nearest
/// reference point. Pairs whose reference normal came from a degenerate
/// neighborhood are dropped. The reference cloud must carry normals.
inline CorrespondenceSet match(const PointCloud& source,
                               const RigidTransform& prior,
                               const KdIndex& index,
                               const PointCloud& reference) {
  if (source.empty()) throw EmptyCloud("match: source cloud is empty");
  if (!reference.has_normals()) {
    throw MissingNormals("match: reference cloud has no normals");
  }
  if (index.size() != reference.size()) {
    throw LengthMismatch("match: index size " + std::to_string(index.size()) +
                         " != reference size " +
                         std::to_string(reference.size()));
  }
  CorrespondenceSet out;
  out.source_pts.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    Vec3 p = prior.apply(source.points[i]);
    auto [idx, dist] = index.nearest(p);
    if (!reference.degenerate_normal.empty() &&
        reference.degenerate_normal[idx]) {
      continue;
    }
    out.source_pts.push_back(p);
    out.ref_pts.push_back(reference.points[idx]);
    out.ref_normals.push_back(reference.normals[idx]);
    out.distances.push_back(dist);
    out.ref_indices.push_back(idx);
  }
  return out;
}

/// Keeps the ceil(keep_ratio * N) pairs with the smallest distances,
/// preserving the original order among kept pairs. Ties at the cutoff are
/// broken toward the earlier pair. Expects keep_ratio in (0, 1].
inline CorrespondenceSet trimmed_filter(const CorrespondenceSet& corr,
                                        double keep_ratio = 0.90) {
  std::size_t n = corr.size();
  if (n == 0) return corr;
  std::size_t keep = static_cast<std::size_t>(
      std::ceil(keep_ratio * static_cast<double>(n)));
  keep = std::min(keep, n);
  if (keep == n) return corr;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return corr.distances[a] < corr.distances[b];
  });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  CorrespondenceSet out;
  out.source_pts.reserve(keep);
  for (std::size_t i : order) {
    out.source_pts.push_back(corr.source_pts[i]);
    out.ref_pts.push_back(corr.ref_pts[i]);
    out.ref_normals.push_back(corr.ref_normals[i]);
    out.distances.push_back(corr.distances[i]);
    out.ref_indices.push_back(corr.ref_indices[i]);
  }
  return out;
}

}  // namespace dmicp
