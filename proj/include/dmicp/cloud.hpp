#pragma once

#include <algorithm>
#include <cmath>

#include "dmicp/core.hpp"
#include "dmicp/kdtree.hpp"
#include "dmicp/linalg.hpp"
#include "dmicp/point_cloud.hpp"

namespace dmicp {

/// PCA normals from the k-nearest neighborhood of each point (the point
/// itself plus its k nearest neighbors). Normals are oriented toward the
/// origin (sensor viewpoint); the point-to-plane cost is sign-invariant, so
/// orientation only matters for visualization. Points whose neighborhood is
/// nearly collinear (middle covariance eigenvalue below 1e-6 of the largest)
/// get `degenerate_normal` set; matching drops them.
/// Expects k >= 3 and cloud.size() >= k + 1.
inline PointCloud estimate_normals(const PointCloud& cloud, int k = 10) {
  if (k < 3) throw TooFewPoints("estimate_normals: k must be >= 3");
  if (cloud.size() < static_cast<std::size_t>(k) + 1) {
    throw TooFewPoints("estimate_normals: need at least k+1 points, have " +
                       std::to_string(cloud.size()));
  }
  KdIndex index(cloud);
  PointCloud out;
  out.points = cloud.points;
  out.normals.resize(cloud.size());
  out.degenerate_normal.assign(cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto nbrs = index.knn(cloud.points[i], k + 1);
    Vec3 mean = Vec3::Zero();
    for (const auto& [idx, dist] : nbrs) mean += cloud.points[idx];
    mean /= static_cast<double>(nbrs.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& [idx, dist] : nbrs) {
      Vec3 d = cloud.points[idx] - mean;
      cov += d * d.transpose();
    }
    SymEig3 eig = sym_eig<3>(cov);
    Vec3 n = eig.eigenvectors.col(2);  // smallest eigenvalue
    if (n.dot(cloud.points[i]) > 0.0) n = -n;
    out.normals[i] = n;
    double lam_max = eig.eigenvalues(0);
    double lam_mid = eig.eigenvalues(1);
    if (lam_max <= 0.0 || lam_mid < 1e-6 * lam_max) {
      out.degenerate_normal[i] = 1;
    }
  }
  return out;
}

}  // namespace dmicp
