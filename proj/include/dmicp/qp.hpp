// Box-constrained convex QP: minimize x^T F x / 2 + f^T x subject to
// lower_j <= l_j . x <= upper_j for each constraint row l_j. Solved with a
// dual active-set iteration (Goldfarb-Idnani): start at the unconstrained
// minimum, repeatedly add the most violated bound, taking partial steps that
// drop active constraints whose multiplier would go negative. Dual
// feasibility holds throughout, so the objective trace is non-decreasing
// and the final point satisfies the KKT conditions.
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "dmicp/core.hpp"
#include "dmicp/linalg.hpp"

namespace dmicp {

struct QpProblem {
  Mat6 F = Mat6::Zero();  // symmetric PSD; floored to PD internally
  Vec6 f = Vec6::Zero();
  RowMat6 L;              // c x 6 constraint rows
  Eigen::VectorXd lower;  // c
  Eigen::VectorXd upper;  // c
};

struct ActiveConstraint {
  int row = -1;
  int side = 0;  // +1 upper bound, -1 lower bound
};

struct QpSolution {
  Vec6 x = Vec6::Zero();
  std::vector<ActiveConstraint> active_set;
  std::vector<double> dual_values;      // >= 0, parallel to active_set
  int iterations = 0;                   // active-set changes
  std::vector<double> objective_trace;  // after each change, non-decreasing
};

inline QpSolution qp_solve(const QpProblem& prob) {
  const Eigen::Index c = prob.L.rows();
  if (prob.lower.size() != c || prob.upper.size() != c) {
    throw LengthMismatch("qp_solve: bounds size != constraint rows");
  }
  for (Eigen::Index j = 0; j < c; ++j) {
    if (prob.lower(j) > prob.upper(j)) {
      throw Infeasible("qp_solve: lower > upper on row " + std::to_string(j));
    }
  }

  // PD floor: a semidefinite F gains a small ridge so the Hessian inverse
  // exists. The ridge is far below the constraint scale and does not move
  // the solution beyond the stated tolerances.
  Mat6 g = 0.5 * (prob.F + prob.F.transpose());
  SymEig6 eig_f = sym_eig<6>(g);
  double sig_max = std::max(eig_f.eigenvalues(0), 0.0);
  if (eig_f.eigenvalues(5) < 1e-12 * sig_max) {
    double bump = 1e-10 * g.trace();
    if (bump <= 0.0) bump = 1e-10;
    g += bump * Mat6::Identity();
    eig_f = sym_eig<6>(g);
  }
  Mat6 g_inv = Mat6::Zero();
  for (int i = 0; i < 6; ++i) {
    g_inv += (1.0 / eig_f.eigenvalues(i)) * eig_f.eigenvectors.col(i) *
             eig_f.eigenvectors.col(i).transpose();
  }

  auto objective = [&](const Vec6& x) {
    return 0.5 * x.dot(g * x) + prob.f.dot(x);
  };

  QpSolution sol;
  sol.x = -(g_inv * prob.f);
  sol.objective_trace.push_back(objective(sol.x));

  struct Active {
    int row;
    int side;
    Vec6 normal;  // of the >=-form constraint
    double dual;
  };
  std::vector<Active> active;

  constexpr int kMaxChanges = 100;
  constexpr double kDualTol = 1e-12;

  auto is_active = [&](int row, int side) {
    for (const auto& a : active) {
      if (a.row == row && a.side == side) return true;
    }
    return false;
  };

  while (true) {
    // Most violated bound in >=-form slack.
    int p_row = -1, p_side = 0;
    double worst = -1e-10;
    Vec6 p_normal = Vec6::Zero();
    double p_rhs = 0.0;
    for (Eigen::Index j = 0; j < c; ++j) {
      Vec6 lj = prob.L.row(j).transpose();
      double v = lj.dot(sol.x);
      double tol_j = 1e-10 * (1.0 + std::max(std::abs(prob.lower(j)),
                                             std::abs(prob.upper(j))));
      double s_lower = v - prob.lower(j);
      if (s_lower < -tol_j && s_lower < worst && !is_active(static_cast<int>(j), -1)) {
        worst = s_lower;
        p_row = static_cast<int>(j);
        p_side = -1;
        p_normal = lj;
        p_rhs = prob.lower(j);
      }
      double s_upper = prob.upper(j) - v;
      if (s_upper < -tol_j && s_upper < worst && !is_active(static_cast<int>(j), +1)) {
        worst = s_upper;
        p_row = static_cast<int>(j);
        p_side = +1;
        p_normal = -lj;
        p_rhs = -prob.upper(j);
      }
    }
    if (p_row < 0) break;  // primal feasible, KKT satisfied

    double u_entering = 0.0;
    while (true) {
      if (sol.iterations >= kMaxChanges) {
        throw MaxIterations("qp_solve: exceeded 100 active-set changes");
      }
      const std::size_t q = active.size();
      Vec6 z;
      Eigen::VectorXd r(q);
      if (q == 0) {
        z = g_inv * p_normal;
      } else {
        Eigen::MatrixXd n(6, q);
        for (std::size_t k = 0; k < q; ++k) n.col(k) = active[k].normal;
        Eigen::MatrixXd gn = g_inv * n;
        Eigen::MatrixXd m = n.transpose() * gn;
        r = svd_solve_dyn(m, n.transpose() * (g_inv * p_normal));
        z = g_inv * p_normal - gn * r;
      }
      double znp = z.dot(p_normal);
      bool z_zero = znp <= 1e-14 * (1.0 + p_normal.squaredNorm());

      double t1 = std::numeric_limits<double>::infinity();
      int drop_k = -1;
      for (std::size_t k = 0; k < q; ++k) {
        if (r(k) > kDualTol) {
          double cand = active[k].dual / r(k);
          if (cand < t1) {
            t1 = cand;
            drop_k = static_cast<int>(k);
          }
        }
      }
      double s_p = p_normal.dot(sol.x) - p_rhs;
      double t2 = z_zero ? std::numeric_limits<double>::infinity() : -s_p / znp;
      double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        throw Infeasible("qp_solve: no finite step for row " +
                         std::to_string(p_row));
      }
      if (!z_zero) sol.x += t * z;
      for (std::size_t k = 0; k < q; ++k) active[k].dual -= t * r(k);
      u_entering += t;

      if (t2 <= t1) {
        active.push_back({p_row, p_side, p_normal, u_entering});
        sol.iterations++;
        sol.objective_trace.push_back(objective(sol.x));
        break;
      }
      active.erase(active.begin() + drop_k);
      sol.iterations++;
      sol.objective_trace.push_back(objective(sol.x));
    }
  }

  sol.active_set.reserve(active.size());
  sol.dual_values.reserve(active.size());
  for (const auto& a : active) {
    sol.active_set.push_back({a.row, a.side});
    sol.dual_values.push_back(a.dual);
  }
  return sol;
}

}  // namespace dmicp
