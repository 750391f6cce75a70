// The nine increment solvers compared by the experiments. All consume the
// same linearized system and localizability report and return a 6-DoF
// increment x = [r; t]:
//   P2Plane       unconstrained Gauss-Newton baseline
//   EqCon         equality constraints: zero motion along degenerate rows
//   IneqCon       box inequality constraints via the dual active-set QP
//   SolutionRemap projection of the unconstrained step off degenerate rows
//   Tsvd          truncated pseudo-inverse with a floor on weak directions
//   LReg          Tikhonov regularization along degenerate rows
//   NlReg         nonlinear re-solve with quadratic penalty on those rows
//   PriorOnly     holds the pose whenever anything is degenerate
//   Cauchy        robust IRLS reweighting, degeneracy-blind
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dmicp/core.hpp"
#include "dmicp/degeneracy.hpp"
#include "dmicp/linalg.hpp"
#include "dmicp/linearize.hpp"
#include "dmicp/matching.hpp"
#include "dmicp/qp.hpp"

namespace dmicp {

enum class MethodKind {
  P2Plane,
  EqCon,
  IneqCon,
  SolutionRemap,
  Tsvd,
  LReg,
  NlReg,
  PriorOnly,
  Cauchy,
};

inline const char* to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::P2Plane: return "P2Plane";
    case MethodKind::EqCon: return "EqCon";
    case MethodKind::IneqCon: return "IneqCon";
    case MethodKind::SolutionRemap: return "SolutionRemap";
    case MethodKind::Tsvd: return "Tsvd";
    case MethodKind::LReg: return "LReg";
    case MethodKind::NlReg: return "NlReg";
    case MethodKind::PriorOnly: return "PriorOnly";
    case MethodKind::Cauchy: return "Cauchy";
  }
  return "?";
}

inline MethodKind method_from_string(const std::string& s) {
  for (MethodKind k :
       {MethodKind::P2Plane, MethodKind::EqCon, MethodKind::IneqCon,
        MethodKind::SolutionRemap, MethodKind::Tsvd, MethodKind::LReg,
        MethodKind::NlReg, MethodKind::PriorOnly, MethodKind::Cauchy}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown method '" + s + "'");
}

inline std::vector<MethodKind> all_methods() {
  return {MethodKind::P2Plane,  MethodKind::EqCon,   MethodKind::IneqCon,
          MethodKind::SolutionRemap, MethodKind::Tsvd, MethodKind::LReg,
          MethodKind::NlReg,    MethodKind::PriorOnly, MethodKind::Cauchy};
}

struct LmConfig {
  double parameter_tolerance = 1e-3;
  double function_tolerance = 1e-3;
  double gradient_tolerance = 1e-6;
  double initial_damping = 0.0;  // <= 0 selects 1e-4 * trace(H) / 6
  double damping_increase = 10.0;
  double damping_decrease = 3.0;
  double trust_region_radius = 0.5;  // clamp on ||step||
  int max_inner_iterations = 50;
};

struct MitigationConfig {
  double epsilon = 0.0014;      // IneqCon bound; rotations get epsilon / 2
  double lambda_lreg = 440.0;   // Tikhonov weight
  double lambda_nlreg = 675.0;  // nonlinear penalty weight
  double kappa = 1.0;           // Cauchy kernel parameter
  double tsvd_floor = 1e-4;     // replaces truncated reciprocals
  int max_irls_rounds = 10;
  double irls_x_tolerance = 1e-8;
  LmConfig lm;
};

struct SolveOutcome {
  Vec6 x = Vec6::Zero();
  // EqCon: KKT multipliers per constraint row. IneqCon: signed multiplier
  // per constraint row, positive when the upper bound is active, negative
  // when the lower one is, zero when inactive.
  std::optional<Eigen::VectorXd> lagrange_multipliers;
  bool skipped = false;      // PriorOnly held the pose
  int inner_iterations = 0;  // LM steps, IRLS rounds, or QP changes
  bool no_progress = false;  // LM damping hit its ceiling without a decrease
};

inline SolveOutcome solve_p2plane(const NormalEquations& ne) {
  SolveOutcome out;
  out.x = svd_solve(ne.A, ne.b);
  return out;
}

/// Minimizes the linearized cost subject to C x = d via the KKT system
///   [2A  C^T] [x]   [2b]
///   [C    0 ] [l] = [d ]
/// solved as a minimum-norm least-squares problem, so a constraint that is
/// (numerically) redundant does not blow up the multipliers.
inline SolveOutcome solve_eq_con(const NormalEquations& ne, const RowMat6& c_rows,
                                 const Eigen::VectorXd& d) {
  const Eigen::Index c = c_rows.rows();
  if (d.size() != c) {
    throw LengthMismatch("solve_eq_con: d size != constraint rows");
  }
  if (c == 0) return solve_p2plane(ne);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(6 + c, 6 + c);
  m.topLeftCorner(6, 6) = 2.0 * ne.A;
  m.topRightCorner(6, c) = c_rows.transpose();
  m.bottomLeftCorner(c, 6) = c_rows;
  Eigen::VectorXd rhs(6 + c);
  rhs.head(6) = 2.0 * ne.b;
  rhs.tail(c) = d;
  Eigen::VectorXd y = svd_solve_dyn(m, rhs);
  SolveOutcome out;
  out.x = y.head(6);
  out.lagrange_multipliers = y.tail(c).eval();
  return out;
}

inline SolveOutcome solve_eq_con(const NormalEquations& ne,
                                 const LocalizabilityReport& rep) {
  return solve_eq_con(ne, rep.constraint_rows,
                      Eigen::VectorXd::Zero(rep.constraint_rows.rows()));
}

/// Bounds motion along each degenerate row instead of zeroing it:
/// |v . x| <= epsilon/2 for rotational rows, <= epsilon for translational.
inline SolveOutcome solve_ineq_con(const NormalEquations& ne,
                                   const LocalizabilityReport& rep,
                                   double epsilon) {
  QpProblem qp;
  qp.F = 2.0 * ne.A;
  qp.f = -2.0 * ne.b;
  qp.L = rep.constraint_rows;
  const Eigen::Index c = rep.constraint_rows.rows();
  qp.lower.resize(c);
  qp.upper.resize(c);
  for (Eigen::Index j = 0; j < c; ++j) {
    double bound = rep.row_kinds[static_cast<std::size_t>(j)] ==
                           ConstraintKind::Rotational
                       ? epsilon / 2.0
                       : epsilon;
    qp.lower(j) = -bound;
    qp.upper(j) = bound;
  }
  QpSolution qs = qp_solve(qp);
  SolveOutcome out;
  out.x = qs.x;
  out.inner_iterations = qs.iterations;
  Eigen::VectorXd mult = Eigen::VectorXd::Zero(c);
  for (std::size_t k = 0; k < qs.active_set.size(); ++k) {
    mult(qs.active_set[k].row) +=
        qs.active_set[k].side * qs.dual_values[k];
  }
  out.lagrange_multipliers = mult;
  return out;
}

/// Projects the unconstrained step onto the complement of the degenerate
/// rows: x = (I - sum v v^T) x_p2plane. The projector is assembled from the
/// report's lifted constraint rows directly, so the remapped step has
/// exactly zero component along every flagged direction.
inline SolveOutcome solve_remap(const NormalEquations& ne,
                                const LocalizabilityReport& rep) {
  SolveOutcome out = solve_p2plane(ne);
  if (rep.c() == 0) return out;
  Mat6 proj = Mat6::Identity();
  for (Eigen::Index j = 0; j < rep.constraint_rows.rows(); ++j) {
    Vec6 v = rep.constraint_rows.row(j).transpose();
    proj -= v * v.transpose();
  }
  out.x = proj * out.x;
  return out;
}

/// Truncated pseudo-inverse: eigen-directions of A matched to a flagged row
/// (|cos| > 0.9) get their reciprocal replaced by the floor value instead of
/// 1/sigma, which caps how far the solution can move along weak directions.
inline SolveOutcome solve_tsvd(const NormalEquations& ne,
                               const LocalizabilityReport& rep,
                               double floor_value) {
  SymEig6 eig = sym_eig<6>(ne.A);
  double sig_max = std::max(eig.eigenvalues(0), 0.0);
  SolveOutcome out;
  Vec6 x = Vec6::Zero();
  for (int i = 0; i < 6; ++i) {
    Vec6 u = eig.eigenvectors.col(i);
    bool matched = false;
    for (Eigen::Index j = 0; j < rep.constraint_rows.rows(); ++j) {
      if (std::abs(u.dot(rep.constraint_rows.row(j).transpose())) > 0.9) {
        matched = true;
        break;
      }
    }
    double inv;
    double sigma = eig.eigenvalues(i);
    if (matched) {
      inv = floor_value;
    } else if (sigma > 1e-12 * sig_max && sigma > 0.0) {
      inv = 1.0 / sigma;
    } else {
      inv = 0.0;  // unmatched exact-null direction: contribute nothing
    }
    x += inv * u.dot(ne.b) * u;
  }
  out.x = x;
  return out;
}

/// Tikhonov regularization restricted to the degenerate rows:
/// x = svd_solve(A + lambda C^T C, b). The wider rank tolerance keeps the
/// well-constrained block of A above the truncation cut even when lambda
/// dwarfs it (lambda up to ~1e12 must still reduce to the equality limit).
inline SolveOutcome solve_lreg(const NormalEquations& ne,
                               const LocalizabilityReport& rep, double lambda) {
  SolveOutcome out;
  if (rep.c() == 0) {
    out.x = svd_solve(ne.A, ne.b);
    return out;
  }
  Mat6 m = ne.A + lambda * (rep.constraint_rows.transpose() *
                            rep.constraint_rows);
  out.x = svd_solve(m, ne.b, 1e-14);
  return out;
}

inline double cauchy_rho(double e, double kappa) {
  double u = e / kappa;
  return 0.5 * kappa * kappa * std::log1p(u * u);
}

inline double cauchy_weight(double e, double kappa) {
  double u = e / kappa;
  return 1.0 / (1.0 + u * u);
}

/// 1.4826 * median(|e - median(e)|), floored at 1e-9 so weights stay finite
/// when more than half the residuals coincide.
inline double mad_scale(const Eigen::VectorXd& e) {
  auto median = [](std::vector<double> v) {
    std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    double hi = v[n / 2];
    if (n % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
    return 0.5 * (v[n / 2 - 1] + hi);
  };
  std::vector<double> vals(e.data(), e.data() + e.size());
  double med = median(vals);
  for (auto& v : vals) v = std::abs(v - med);
  double mad = median(std::move(vals));
  return std::max(1.4826 * mad, 1e-9);
}

/// Degeneracy-blind robust baseline: iteratively reweighted least squares
/// with the Cauchy kernel on MAD-standardized residuals. Runs on the
/// untrimmed rows; the kernel is the outlier treatment.
inline SolveOutcome solve_cauchy(const ResidualRows& rows, double kappa,
                                 int max_rounds, double x_tolerance) {
  if (rows.size() == 0) throw EmptyCorrespondences("solve_cauchy: no rows");
  SolveOutcome out;
  Vec6 x = Vec6::Zero();
  for (int round = 1; round <= max_rounds; ++round) {
    Eigen::VectorXd e = rows.rows * x - rows.residuals;
    double s = mad_scale(e);
    Mat6 aw = Mat6::Zero();
    Vec6 bw = Vec6::Zero();
    for (Eigen::Index i = 0; i < rows.size(); ++i) {
      double w = cauchy_weight(e(i) / s, kappa);
      Vec6 a = rows.rows.row(i).transpose();
      aw.noalias() += w * a * a.transpose();
      bw.noalias() += w * a * rows.residuals(i);
    }
    Vec6 x_new = svd_solve(aw, bw);
    out.inner_iterations = round;
    double step = (x_new - x).norm();
    x = x_new;
    if (step <= x_tolerance) break;
  }
  out.x = x;
  return out;
}

/// Holds the pose whenever any direction is degenerate; otherwise plain
/// Gauss-Newton.
inline SolveOutcome solve_prior_only(const NormalEquations& ne,
                                     const LocalizabilityReport& rep) {
  if (rep.any()) {
    SolveOutcome out;
    out.skipped = true;
    return out;
  }
  return solve_p2plane(ne);
}

namespace detail {

struct NlregEval {
  Eigen::VectorXd e;
  RowMat6 jac;
};

inline NlregEval nlreg_residuals(const CorrespondenceSet& corr, const Vec6& x,
                                 bool with_jacobian) {
  NlregEval ev;
  Eigen::Index n = static_cast<Eigen::Index>(corr.size());
  ev.e.resize(n);
  if (with_jacobian) ev.jac.resize(n, 6);
  Vec3 r = x.head<3>();
  Vec3 t = x.tail<3>();
  Mat3 rot = exp_so3(r);
  Mat3 jr_t = right_jacobian_so3(r).transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3& p = corr.source_pts[i];
    const Vec3& q = corr.ref_pts[i];
    const Vec3& nrm = corr.ref_normals[i];
    ev.e(i) = nrm.dot(rot * p + t - q);
    if (with_jacobian) {
      // d(R p)/dr = -R hat(p) Jr(r), so de/dr = Jr^T (p x (R^T n)).
      Vec3 jrot = jr_t * p.cross(rot.transpose() * nrm);
      ev.jac.block<1, 3>(i, 0) = jrot.transpose();
      ev.jac.block<1, 3>(i, 3) = nrm.transpose();
    }
  }
  return ev;
}

}  // namespace detail

/// Full nonlinear cost of the penalized re-solve:
/// E(x) = sum_i (n_i . (exp(hat(r)) p_i + t - q_i))^2 + lambda ||L x||^2.
inline double nlreg_cost(const CorrespondenceSet& corr, const RowMat6& l,
                         double lambda, const Vec6& x) {
  double cost = detail::nlreg_residuals(corr, x, false).e.squaredNorm();
  if (l.rows() > 0) cost += lambda * (l * x).squaredNorm();
  return cost;
}

/// Analytic gradient of nlreg_cost: 2 J^T e + 2 lambda L^T L x.
inline Vec6 nlreg_gradient(const CorrespondenceSet& corr, const RowMat6& l,
                           double lambda, const Vec6& x) {
  detail::NlregEval ev = detail::nlreg_residuals(corr, x, true);
  Vec6 g = 2.0 * ev.jac.transpose() * ev.e;
  if (l.rows() > 0) g += 2.0 * lambda * (l.transpose() * (l * x));
  return g;
}

/// Levenberg-Marquardt on the penalized nonlinear cost, starting at x = 0.
/// Damping multiplies up on rejection and divides down on acceptance; steps
/// are clamped to the trust-region radius. Termination mirrors the usual
/// parameter / function / gradient tolerance trio. If damping climbs past
/// its ceiling without ever reducing the cost, the best-so-far increment is
/// returned with no_progress set.
inline SolveOutcome solve_nlreg(const CorrespondenceSet& corr, const RowMat6& l,
                                double lambda, const LmConfig& lm = {}) {
  if (corr.empty()) throw EmptyCorrespondences("solve_nlreg: no pairs");
  Mat6 ltl = Mat6::Zero();
  if (l.rows() > 0) ltl = l.transpose() * l;

  SolveOutcome out;
  Vec6 x = Vec6::Zero();
  detail::NlregEval ev = detail::nlreg_residuals(corr, x, true);
  double cost = ev.e.squaredNorm() + lambda * (x.dot(ltl * x));
  Vec6 grad = 2.0 * ev.jac.transpose() * ev.e + 2.0 * lambda * (ltl * x);
  Mat6 h = 2.0 * ev.jac.transpose() * ev.jac + 2.0 * lambda * ltl;

  if (grad.lpNorm<Eigen::Infinity>() <= lm.gradient_tolerance) {
    out.x = x;
    return out;
  }
  double damping = lm.initial_damping > 0.0 ? lm.initial_damping
                                            : 1e-4 * h.trace() / 6.0;
  if (damping <= 0.0) damping = 1e-8;
  const double damping_ceiling = damping * 1e12;

  for (int iter = 1; iter <= lm.max_inner_iterations; ++iter) {
    out.inner_iterations = iter;
    Vec6 step = svd_solve(h + damping * Mat6::Identity(), -grad);
    double norm = step.norm();
    if (norm > lm.trust_region_radius) {
      step *= lm.trust_region_radius / norm;
      norm = lm.trust_region_radius;
    }
    Vec6 x_new = x + step;
    detail::NlregEval ev_new = detail::nlreg_residuals(corr, x_new, true);
    double cost_new = ev_new.e.squaredNorm() + lambda * (x_new.dot(ltl * x_new));
    if (cost_new < cost) {
      double decrease = cost - cost_new;
      x = x_new;
      grad = 2.0 * ev_new.jac.transpose() * ev_new.e + 2.0 * lambda * (ltl * x);
      h = 2.0 * ev_new.jac.transpose() * ev_new.jac + 2.0 * lambda * ltl;
      damping = std::max(damping / lm.damping_decrease, 1e-18);
      bool param_done = norm <= lm.parameter_tolerance * (x.norm() + lm.parameter_tolerance);
      bool func_done = decrease <= lm.function_tolerance * cost;
      bool grad_done = grad.lpNorm<Eigen::Infinity>() <= lm.gradient_tolerance;
      cost = cost_new;
      if (param_done || func_done || grad_done) break;
    } else {
      damping *= lm.damping_increase;
      if (damping > damping_ceiling) {
        out.no_progress = true;
        break;
      }
    }
  }
  out.x = x;
  return out;
}

inline SolveOutcome solve_nlreg(const CorrespondenceSet& corr,
                                const LocalizabilityReport& rep, double lambda,
                                const LmConfig& lm = {}) {
  return solve_nlreg(corr, rep.constraint_rows, lambda, lm);
}

/// Dispatches one ICP iteration's increment solve for the chosen method.
/// `rows` and `corr` must describe the same pair set the normal equations
/// were built from.
inline SolveOutcome solve_increment(MethodKind kind, const ResidualRows& rows,
                                    const CorrespondenceSet& corr,
                                    const NormalEquations& ne,
                                    const LocalizabilityReport& rep,
                                    const MitigationConfig& cfg) {
  switch (kind) {
    case MethodKind::P2Plane:
      return solve_p2plane(ne);
    case MethodKind::EqCon:
      return solve_eq_con(ne, rep);
    case MethodKind::IneqCon:
      return solve_ineq_con(ne, rep, cfg.epsilon);
    case MethodKind::SolutionRemap:
      return solve_remap(ne, rep);
    case MethodKind::Tsvd:
      return solve_tsvd(ne, rep, cfg.tsvd_floor);
    case MethodKind::LReg:
      return solve_lreg(ne, rep, cfg.lambda_lreg);
    case MethodKind::NlReg:
      return solve_nlreg(corr, rep, cfg.lambda_nlreg, cfg.lm);
    case MethodKind::PriorOnly:
      return solve_prior_only(ne, rep);
    case MethodKind::Cauchy:
      return solve_cauchy(rows, cfg.kappa, cfg.max_irls_rounds,
                          cfg.irls_x_tolerance);
  }
  throw ConfigError("solve_increment: unknown method");
}

}  // namespace dmicp
