// Synthetic scenes. The cylinder is the canonical rotation-degenerate
// object: lateral-surface normals are radial, so no residual changes under
// rotation about the axis (and none under translation along it either).
// The pillar scene is a ground plane with one box obstacle; scans taken far
// from the box see only the plane and lose planar translation and yaw.
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "dmicp/core.hpp"
#include "dmicp/linalg.hpp"
#include "dmicp/point_cloud.hpp"
#include "dmicp/rng.hpp"

namespace dmicp {

struct NoiseSpec {
  double sigma_t = 0.05;  // meters, per translation axis
  double sigma_r = 0.01;  // radians, per rotation-vector axis
  std::uint64_t seed = 0;
};

struct CylinderSpec {
  double radius = 2.0;
  double height = 4.0;
  int n_points = 10000;
  double noise_sigma = 0.0;  // radial range noise per point, meters
  // Optional flat disk at z = 0. Its normals are exactly +z and exert no
  // torque about the axis, so it stiffens translation-z without touching
  // the rotational degeneracy.
  int cap_points = 0;
};

struct PillarSpec {
  double plane_extent = 200.0;  // square side, centered at origin, z = 0
  Vec3 pillar_size = Vec3(2.0, 2.0, 6.0);
  Vec3 pillar_center = Vec3(-80.0, 0.0, 3.0);
  int n_map_points = 60000;
  int scan_point_count = 2000;  // 0 keeps every in-range point
  double sensor_range = 70.0;
  // Ground roughness: vertical jitter of the plane points. Without it the
  // estimated plane normals are exactly vertical, the weak directions of the
  // normal equations are exact nulls, and the minimum-norm baseline cannot
  // drift at all, which erases the contrast between the methods.
  double plane_noise_sigma = 0.0;
  // Per-point sensor noise on each scan, applied in the sensor frame. It
  // decouples the scans from the map samples; an exact-subset scan has its
  // cost minimum exactly at the ground-truth pose even along weak
  // directions, which is not how a rescanning sensor behaves.
  double scan_noise_sigma = 0.0;
  std::vector<RigidTransform> trajectory;  // ground-truth sensor poses
};

/// Uniform samples of the lateral surface: angle ~ U[0, 2pi), z centered.
inline PointCloud sample_cylinder(const CylinderSpec& spec, std::uint64_t seed) {
  if (spec.radius <= 0.0 || spec.height <= 0.0 || spec.n_points <= 0) {
    throw ConfigError("sample_cylinder: radius, height, n_points must be > 0");
  }
  if (spec.noise_sigma < 0.0 || spec.cap_points < 0) {
    throw ConfigError("sample_cylinder: noise_sigma and cap_points must be >= 0");
  }
  Rng rng(derive_stream(seed, "cylinder"));
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(spec.n_points));
  // Centered along z so rotation and translation blocks stay decoupled.
  for (int i = 0; i < spec.n_points; ++i) {
    double phi = rng.uniform(0.0, 2.0 * M_PI);
    double z = rng.uniform(-0.5 * spec.height, 0.5 * spec.height);
    double c = std::cos(phi), s = std::sin(phi);
    double r = spec.radius;
    // Range noise acts along the horizontal beam direction, so it stays
    // in-plane. Extra draw only when noisy; noiseless streams unchanged.
    if (spec.noise_sigma > 0.0) r += rng.normal(spec.noise_sigma);
    cloud.points.emplace_back(r * c, r * s, z);
  }
  for (int i = 0; i < spec.cap_points; ++i) {
    double r = spec.radius * std::sqrt(rng.uniform());
    double phi = rng.uniform(0.0, 2.0 * M_PI);
    cloud.points.emplace_back(r * std::cos(phi), r * std::sin(phi),
                              -0.5 * spec.height);
  }
  return cloud;
}

/// Uniform samples over selected faces of an axis-aligned box, allocated
/// proportionally to face area. Face order: -x, +x, -y, +y, -z, +z.
inline PointCloud sample_box_surface(const Vec3& center, const Vec3& size,
                                     int n, Rng& rng,
                                     std::uint8_t face_mask = 0x3f) {
  double sx = size.x(), sy = size.y(), sz = size.z();
  double areas[6] = {sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy};
  double total = 0.0;
  for (int f = 0; f < 6; ++f) {
    if (face_mask & (1 << f)) total += areas[f];
  }
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double pick = rng.uniform(0.0, total);
    int face = 0;
    double acc = 0.0;
    for (int f = 0; f < 6; ++f) {
      if (!(face_mask & (1 << f))) continue;
      acc += areas[f];
      face = f;
      if (pick <= acc) break;
    }
    double u = rng.uniform(-0.5, 0.5);
    double v = rng.uniform(-0.5, 0.5);
    Vec3 p;
    switch (face) {
      case 0: p = Vec3(-0.5 * sx, u * sy, v * sz); break;
      case 1: p = Vec3(+0.5 * sx, u * sy, v * sz); break;
      case 2: p = Vec3(u * sx, -0.5 * sy, v * sz); break;
      case 3: p = Vec3(u * sx, +0.5 * sy, v * sz); break;
      case 4: p = Vec3(u * sx, v * sy, -0.5 * sz); break;
      default: p = Vec3(u * sx, v * sy, +0.5 * sz); break;
    }
    cloud.points.push_back(center + p);
  }
  return cloud;
}

/// Straight ground-truth path with yaw facing the direction of motion.
inline std::vector<RigidTransform> make_line_trajectory(const Vec3& start,
                                                        const Vec3& end,
                                                        int n_poses) {
  std::vector<RigidTransform> out;
  out.reserve(static_cast<std::size_t>(n_poses));
  Vec3 dir = end - start;
  double yaw = std::atan2(dir.y(), dir.x());
  for (int i = 0; i < n_poses; ++i) {
    double s = n_poses > 1 ? static_cast<double>(i) / (n_poses - 1) : 0.0;
    RigidTransform t;
    t.rotation = exp_so3(Vec3(0.0, 0.0, yaw));
    t.translation = start + s * dir;
    out.push_back(t);
  }
  return out;
}

struct PillarScene {
  PointCloud map;                        // world frame, no normals yet
  std::vector<PointCloud> scans;         // sensor frame, one per pose
  std::vector<RigidTransform> trajectory;
};

/// Builds the map (plane plus pillar, sample count split by area) and one
/// range-culled scan per trajectory pose, expressed in the sensor frame.
/// Scans larger than scan_point_count are subsampled deterministically.
inline PillarScene make_pillar_scene(const PillarSpec& spec,
                                     std::uint64_t seed) {
  if (spec.trajectory.empty()) {
    throw ConfigError("make_pillar_scene: trajectory is empty");
  }
  PillarScene scene;
  scene.trajectory = spec.trajectory;

  double plane_area = spec.plane_extent * spec.plane_extent;
  const Vec3& ps = spec.pillar_size;
  // Bottom face sits on the plane and is never visible.
  double pillar_area = 2.0 * ps.z() * (ps.x() + ps.y()) + ps.x() * ps.y();
  int n_pillar = static_cast<int>(std::lround(
      spec.n_map_points * pillar_area / (plane_area + pillar_area)));
  int n_plane = spec.n_map_points - n_pillar;

  Rng map_rng(derive_stream(seed, "pillar-map"));
  scene.map.points.reserve(static_cast<std::size_t>(spec.n_map_points));
  for (int i = 0; i < n_plane; ++i) {
    double half = 0.5 * spec.plane_extent;
    double x = map_rng.uniform(-half, half);
    double y = map_rng.uniform(-half, half);
    // Extra draw only when roughness is enabled; smooth-ground streams keep
    // their historical draw sequence.
    double z = spec.plane_noise_sigma > 0.0
                   ? map_rng.normal(spec.plane_noise_sigma)
                   : 0.0;
    scene.map.points.emplace_back(x, y, z);
  }
  PointCloud pillar = sample_box_surface(spec.pillar_center, spec.pillar_size,
                                         n_pillar, map_rng, 0x2f);  // skip -z
  scene.map.points.insert(scene.map.points.end(), pillar.points.begin(),
                          pillar.points.end());

  for (std::size_t k = 0; k < spec.trajectory.size(); ++k) {
    const RigidTransform& pose = spec.trajectory[k];
    RigidTransform inv = pose.inverse();
    PointCloud scan;
    for (const Vec3& p : scene.map.points) {
      if ((p - pose.translation).norm() <= spec.sensor_range) {
        scan.points.push_back(inv.apply(p));
      }
    }
    if (spec.scan_point_count > 0 &&
        scan.size() > static_cast<std::size_t>(spec.scan_point_count)) {
      Rng pick(derive_stream(seed, "pillar-scan-" + std::to_string(k)));
      // Partial Fisher-Yates: the first scan_point_count slots become a
      // uniform sample without replacement.
      std::vector<std::uint32_t> idx(scan.size());
      std::iota(idx.begin(), idx.end(), 0u);
      for (int i = 0; i < spec.scan_point_count; ++i) {
        std::size_t j =
            i + static_cast<std::size_t>(pick.uniform_index(idx.size() - i));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
      }
      PointCloud sub;
      sub.points.reserve(static_cast<std::size_t>(spec.scan_point_count));
      for (int i = 0; i < spec.scan_point_count; ++i) {
        sub.points.push_back(scan.points[idx[static_cast<std::size_t>(i)]]);
      }
      scan = std::move(sub);
    }
    if (spec.scan_noise_sigma > 0.0) {
      // Separate stream so enabling noise never shifts the subsample draws.
      Rng noise_rng(
          derive_stream(seed, "pillar-scan-noise-" + std::to_string(k)));
      for (Vec3& p : scan.points) {
        p += noise_rng.normal_vec3(spec.scan_noise_sigma);
      }
    }
    scene.scans.push_back(std::move(scan));
  }
  return scene;
}

/// Draws pose noise deterministically: translation components first, then
/// rotation-vector components, each an independent zero-mean normal.
class NoiseSampler {
 public:
  explicit NoiseSampler(const NoiseSpec& spec)
      : rng_(derive_stream(spec.seed, "prior-noise")), spec_(spec) {}

  RigidTransform next() {
    Vec3 t = rng_.normal_vec3(spec_.sigma_t);
    Vec3 r = rng_.normal_vec3(spec_.sigma_r);
    RigidTransform out;
    out.rotation = exp_so3(r);
    out.translation = t;
    return out;
  }

  /// Ground truth composed with a fresh noise draw: prior = gt o noise.
  RigidTransform perturb(const RigidTransform& gt) { return gt * next(); }

 private:
  Rng rng_;
  NoiseSpec spec_;
};

/// Single deterministic draw for the given spec (seed included).
inline RigidTransform sample_prior_noise(const NoiseSpec& spec) {
  return NoiseSampler(spec).next();
}

inline RigidTransform perturb(const RigidTransform& gt, const NoiseSpec& spec) {
  return gt * sample_prior_noise(spec);
}

}  // namespace dmicp
