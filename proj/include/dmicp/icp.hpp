// The registration loop: match, trim, linearize, detect, solve, apply.
// Detection runs every iteration by default; with detect_every_iteration
// off, the report from the first iteration is frozen and reused, which
// keeps the constrained directions fixed for the whole solve. Motion along
// the first iteration's flagged directions is accumulated per row so the
// drift a method permits is directly observable.
#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dmicp/cloud.hpp"
#include "dmicp/core.hpp"
#include "dmicp/degeneracy.hpp"
#include "dmicp/kdtree.hpp"
#include "dmicp/linalg.hpp"
#include "dmicp/linearize.hpp"
#include "dmicp/matching.hpp"
#include "dmicp/mitigation.hpp"
#include "dmicp/point_cloud.hpp"

namespace dmicp {

struct IcpConfig {
  int max_iterations = 30;
  double trans_convergence = 1e-4;  // meters, on ||t|| of the increment
  double rot_convergence = 1e-5;    // radians, on ||r|| of the increment
  double keep_ratio = 0.90;         // trimmed matching, skipped for Cauchy
  bool detect_every_iteration = true;
  DetectionConfig detection;
  MitigationConfig mitigation;
};

struct IterationRecord {
  int iteration = 0;          // 1-based
  double wall_time_s = 0.0;   // this iteration only; excluded from comparisons
  double residual_cost = 0.0; // squared point-to-plane cost before the update
  int n_correspondences = 0;
  double rot_increment_norm = 0.0;
  double trans_increment_norm = 0.0;
  std::optional<double> rot_error;    // vs ground truth, when provided
  std::optional<double> trans_error;
  // Cumulative sum of |v_j . x_k| per constraint row j of the first
  // iteration's report; slots beyond that report's row count stay zero.
  std::array<double, 6> degenerate_motion{};
  int n_constraints = 0;  // rows in the report governing this iteration
};

struct RegistrationResult {
  RigidTransform pose;
  std::vector<IterationRecord> records;
  bool converged = false;
  bool failed = false;
  std::string error;
  LocalizabilityReport first_report;
  LocalizabilityReport final_report;
};

inline RegistrationResult register_clouds(
    const PointCloud& source, const PointCloud& reference, const KdIndex& index,
    const RigidTransform& prior, MethodKind method, const IcpConfig& cfg = {},
    const std::optional<RigidTransform>& ground_truth = std::nullopt) {
  if (source.empty()) throw EmptyCloud("register_clouds: source is empty");
  if (reference.empty()) throw EmptyCloud("register_clouds: reference is empty");
  if (!reference.has_normals()) {
    throw MissingNormals("register_clouds: reference has no normals");
  }

  RegistrationResult result;
  result.pose = prior;
  std::array<double, 6> cum_motion{};
  bool have_first_report = false;

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    auto t0 = std::chrono::steady_clock::now();
    IterationRecord rec;
    rec.iteration = iter;
    try {
      CorrespondenceSet corr = match(source, result.pose, index, reference);
      if (method != MethodKind::Cauchy) {
        corr = trimmed_filter(corr, cfg.keep_ratio);
      }
      ResidualRows rows = build_rows(corr);
      NormalEquations ne = build_normal_equations(rows);

      if (cfg.detect_every_iteration || !have_first_report) {
        LocalizabilityReport rep = detect(ne, cfg.detection);
        if (!have_first_report) {
          result.first_report = rep;
          have_first_report = true;
        }
        result.final_report = rep;
      }
      const LocalizabilityReport& rep = result.final_report;

      SolveOutcome outcome =
          solve_increment(method, rows, corr, ne, rep, cfg.mitigation);

      rec.residual_cost = residual_cost(rows, Vec6::Zero());
      rec.n_correspondences = static_cast<int>(corr.size());
      rec.n_constraints = rep.c();
      rec.rot_increment_norm = outcome.x.head<3>().norm();
      rec.trans_increment_norm = outcome.x.tail<3>().norm();

      const RowMat6& first_rows = result.first_report.constraint_rows;
      for (Eigen::Index j = 0; j < first_rows.rows() && j < 6; ++j) {
        cum_motion[static_cast<std::size_t>(j)] +=
            std::abs(first_rows.row(j).dot(outcome.x.transpose()));
      }
      rec.degenerate_motion = cum_motion;

      result.pose = apply_increment(result.pose, outcome.x);
      if (ground_truth) {
        PoseError pe = pose_error(result.pose, *ground_truth);
        rec.rot_error = pe.rot;
        rec.trans_error = pe.trans;
      }
      rec.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      result.records.push_back(rec);

      if (rec.rot_increment_norm < cfg.rot_convergence &&
          rec.trans_increment_norm < cfg.trans_convergence) {
        result.converged = true;
        break;
      }
    } catch (const Error& e) {
      rec.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      result.records.push_back(rec);
      result.failed = true;
      result.error = e.what();
      break;
    }
  }
  return result;
}

inline RegistrationResult register_clouds(
    const PointCloud& source, const PointCloud& reference,
    const RigidTransform& prior, MethodKind method, const IcpConfig& cfg = {},
    const std::optional<RigidTransform>& ground_truth = std::nullopt) {
  KdIndex index(reference);
  return register_clouds(source, reference, index, prior, method, cfg,
                         ground_truth);
}

}  // namespace dmicp
