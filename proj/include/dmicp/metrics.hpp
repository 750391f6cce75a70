// Trajectory error metrics. ATE aligns the first poses rigidly and reports
// per-pose error of gt^-1 * est afterwards; RTE compares relative motions
// over a ground-truth path length delta, which cancels any global offset.
#pragma once

#include <cmath>
#include <vector>

#include "dmicp/core.hpp"
#include "dmicp/linalg.hpp"

namespace dmicp {

struct Trajectory {
  std::vector<double> timestamps;
  std::vector<RigidTransform> poses;

  std::size_t size() const { return poses.size(); }

  void check() const {
    if (timestamps.size() != poses.size()) {
      throw LengthMismatch("Trajectory: " + std::to_string(timestamps.size()) +
                           " timestamps vs " + std::to_string(poses.size()) +
                           " poses");
    }
  }
};

struct ErrorStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double max = 0.0;
  std::vector<double> series;
};

inline ErrorStats make_stats(std::vector<double> series) {
  ErrorStats s;
  s.series = std::move(series);
  if (s.series.empty()) return s;
  double sum = 0.0;
  for (double v : s.series) {
    sum += v;
    s.max = std::max(s.max, v);
  }
  s.mean = sum / static_cast<double>(s.series.size());
  double var = 0.0;
  for (double v : s.series) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(s.series.size()));
  return s;
}

struct AteResult {
  ErrorStats trans;
  ErrorStats rot;
};

namespace detail {

inline void check_pair(const Trajectory& est, const Trajectory& gt) {
  est.check();
  gt.check();
  if (est.size() != gt.size()) {
    throw LengthMismatch("trajectory sizes differ: " +
                         std::to_string(est.size()) + " vs " +
                         std::to_string(gt.size()));
  }
  if (est.size() == 0) throw LengthMismatch("trajectories are empty");
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (std::abs(est.timestamps[i] - gt.timestamps[i]) > 1e-9) {
      throw TimestampMismatch("timestamp " + std::to_string(i) + " differs");
    }
  }
}

}  // namespace detail

/// Absolute trajectory error after aligning the first poses: a constant
/// offset shared by every pose is absorbed entirely.
inline AteResult ate(const Trajectory& est, const Trajectory& gt) {
  detail::check_pair(est, gt);
  RigidTransform align = gt.poses[0] * est.poses[0].inverse();
  std::vector<double> terr, rerr;
  terr.reserve(est.size());
  rerr.reserve(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    RigidTransform aligned = align * est.poses[i];
    PoseError pe = pose_error(aligned, gt.poses[i]);
    terr.push_back(pe.trans);
    rerr.push_back(pe.rot);
  }
  return AteResult{make_stats(std::move(terr)), make_stats(std::move(rerr))};
}

/// Relative trajectory error: for each pose i, the first later pose j with
/// ground-truth path length >= delta defines a motion pair; the error is the
/// discrepancy of est vs gt relative motion. Poses with no qualifying j are
/// skipped; delta -> 0 degenerates to consecutive-pose error.
inline AteResult rte(const Trajectory& est, const Trajectory& gt,
                     double delta) {
  detail::check_pair(est, gt);
  std::vector<double> cum(gt.size(), 0.0);
  for (std::size_t i = 1; i < gt.size(); ++i) {
    cum[i] = cum[i - 1] +
             (gt.poses[i].translation - gt.poses[i - 1].translation).norm();
  }
  std::vector<double> terr, rerr;
  for (std::size_t i = 0; i + 1 < gt.size(); ++i) {
    std::size_t j = i + 1;
    while (j < gt.size() && cum[j] - cum[i] < delta - 1e-12) ++j;
    if (j >= gt.size()) break;
    RigidTransform dgt = gt.poses[i].inverse() * gt.poses[j];
    RigidTransform dest = est.poses[i].inverse() * est.poses[j];
    RigidTransform err = dgt.inverse() * dest;
    terr.push_back(err.translation.norm());
    double c = (err.rotation.trace() - 1.0) * 0.5;
    rerr.push_back(std::acos(std::clamp(c, -1.0, 1.0)));
  }
  return AteResult{make_stats(std::move(terr)), make_stats(std::move(rerr))};
}

/// Cumulative motion along a fixed direction v: series[k] = sum_{m<=k}
/// |v . x_m| over the per-iteration increments.
inline std::vector<double> degenerate_motion(const std::vector<Vec6>& increments,
                                             const Vec6& v) {
  std::vector<double> out;
  out.reserve(increments.size());
  double acc = 0.0;
  for (const Vec6& x : increments) {
    acc += std::abs(v.dot(x));
    out.push_back(acc);
  }
  return out;
}

}  // namespace dmicp
