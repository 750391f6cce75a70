// Linearization of the point-to-plane cost around the current pose. Each
// pair contributes a row a_i = [(p_i x n_i); n_i] and a scalar residual
// res_i = n_i . (q_i - p_i), where p_i is the source point already in the
// map frame. The summed system A = sum a_i a_i^T, b = sum a_i res_i is the
// Gauss-Newton normal system for x = [r; t]; its solution is the increment.
#pragma once

#include <cmath>

#include "dmicp/core.hpp"
#include "dmicp/matching.hpp"

namespace dmicp {

struct ResidualRows {
  RowMat6 rows;               // N x 6
  Eigen::VectorXd residuals;  // N
  Eigen::Index size() const { return rows.rows(); }
};

struct NormalEquations {
  Mat6 A = Mat6::Zero();
  Vec6 b = Vec6::Zero();
  int n_pairs = 0;
};

inline ResidualRows build_rows(const CorrespondenceSet& corr) {
  if (corr.empty()) throw EmptyCorrespondences("build_rows: no pairs");
  Eigen::Index n = static_cast<Eigen::Index>(corr.size());
  ResidualRows out;
  out.rows.resize(n, 6);
  out.residuals.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3& p = corr.source_pts[i];
    const Vec3& q = corr.ref_pts[i];
    const Vec3& nrm = corr.ref_normals[i];
    out.rows.block<1, 3>(i, 0) = p.cross(nrm).transpose();
    out.rows.block<1, 3>(i, 3) = nrm.transpose();
    out.residuals(i) = nrm.dot(q - p);
  }
  return out;
}

namespace detail {

// Pairwise (tree) summation keeps the accumulated A and b accurate and
// exactly symmetric for large pair counts.
inline void accumulate_pairwise(const ResidualRows& rr, Eigen::Index lo,
                                Eigen::Index hi, Mat6& a, Vec6& b) {
  if (hi - lo <= 64) {
    for (Eigen::Index i = lo; i < hi; ++i) {
      Vec6 row = rr.rows.row(i).transpose();
      a.noalias() += row * row.transpose();
      b.noalias() += row * rr.residuals(i);
    }
    return;
  }
  Eigen::Index mid = lo + (hi - lo) / 2;
  Mat6 a2 = Mat6::Zero();
  Vec6 b2 = Vec6::Zero();
  accumulate_pairwise(rr, lo, mid, a, b);
  accumulate_pairwise(rr, mid, hi, a2, b2);
  a += a2;
  b += b2;
}

}  // namespace detail

inline NormalEquations build_normal_equations(const ResidualRows& rr) {
  if (rr.size() == 0) throw EmptyCorrespondences("build_normal_equations: no rows");
  NormalEquations ne;
  Mat6 a = Mat6::Zero();
  Vec6 b = Vec6::Zero();
  detail::accumulate_pairwise(rr, 0, rr.size(), a, b);
  ne.A = a;
  ne.b = b;
  ne.n_pairs = static_cast<int>(rr.size());
  return ne;
}

/// Linearized cost sum_i (a_i . x - res_i)^2 at increment x. At x = 0 this
/// is the current squared point-to-plane misalignment.
inline double residual_cost(const ResidualRows& rr, const Vec6& x) {
  double cost = 0.0;
  for (Eigen::Index i = 0; i < rr.size(); ++i) {
    double e = rr.rows.row(i).dot(x) - rr.residuals(i);
    cost += e * e;
  }
  return cost;
}

inline double residual_cost(const CorrespondenceSet& corr, const Vec6& x) {
  return residual_cost(build_rows(corr), x);
}

}  // namespace dmicp
