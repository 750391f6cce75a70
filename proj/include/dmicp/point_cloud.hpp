#pragma once

#include <cstdint>
#include <vector>

#include "dmicp/core.hpp"
#include "dmicp/linalg.hpp"

namespace dmicp {

/// Points with optional per-point unit normals. `normals` is either empty or
/// the same length as `points`; `degenerate_normal` marks points whose
/// normal came from an ill-conditioned neighborhood and is only non-empty
/// when normals are present.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<std::uint8_t> degenerate_normal;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }
};

/// Keeps points with ||p|| <= max_range (range from the sensor at the
/// origin of the cloud's frame). Idempotent. Expects max_range > 0.
inline PointCloud range_filter(const PointCloud& cloud, double max_range) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.points[i].norm() <= max_range) {
      out.points.push_back(cloud.points[i]);
      if (cloud.has_normals()) {
        out.normals.push_back(cloud.normals[i]);
        if (!cloud.degenerate_normal.empty()) {
          out.degenerate_normal.push_back(cloud.degenerate_normal[i]);
        }
      }
    }
  }
  return out;
}

/// Rigidly transforms points and rotates normals.
inline PointCloud transform_cloud(const PointCloud& cloud,
                                  const RigidTransform& t) {
  PointCloud out = cloud;
  for (auto& p : out.points) p = t.apply(p);
  for (auto& n : out.normals) n = t.rotation * n;
  return out;
}

}  // namespace dmicp
