// Small fixed-size linear algebra for the 6-DoF registration state
// x = [r; t] (rotation increment first, then translation). Decompositions
// are backed by Eigen; this header adds the conventions the rest of the
// library relies on: descending eigenvalue order, sign-canonical
// eigenvectors, truncated pseudo-inverse solves, and exact SO(3) updates.
#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "dmicp/core.hpp"

namespace dmicp {

/// Skew-symmetric cross-product matrix: hat(v) * w == v x w.
inline Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

template <int N>
struct SymEigT {
  Eigen::Matrix<double, N, 1> eigenvalues;   // descending
  Eigen::Matrix<double, N, N> eigenvectors;  // columns, unit norm
};

using SymEig3 = SymEigT<3>;
using SymEig6 = SymEigT<6>;

/// Eigendecomposition of a symmetric PSD matrix. Eigenvalues are returned in
/// descending order; each eigenvector's largest-magnitude component is made
/// positive so outputs are stable across runs. Tiny negative eigenvalues from
/// round-off are clamped to zero.
template <int N>
SymEigT<N> sym_eig(const Eigen::Matrix<double, N, N>& m) {
  double scale = m.template lpNorm<Eigen::Infinity>();
  double asym = (m - m.transpose()).template lpNorm<Eigen::Infinity>();
  if (asym > 1e-8 * std::max(1.0, scale)) {
    throw NotSymmetric("sym_eig: matrix asymmetry " + std::to_string(asym) +
                       " exceeds tolerance");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(
      0.5 * (m + m.transpose()));
  SymEigT<N> out;
  // Eigen sorts ascending; reverse to descending.
  for (int i = 0; i < N; ++i) {
    out.eigenvalues(i) = es.eigenvalues()(N - 1 - i);
    out.eigenvectors.col(i) = es.eigenvectors().col(N - 1 - i);
  }
  double lam_max = std::max(0.0, out.eigenvalues(0));
  double clamp_tol = 1e-9 * std::max(1.0, lam_max);
  for (int i = 0; i < N; ++i) {
    if (out.eigenvalues(i) < 0.0 && out.eigenvalues(i) > -clamp_tol) {
      out.eigenvalues(i) = 0.0;
    }
    int imax = 0;
    out.eigenvectors.col(i).cwiseAbs().maxCoeff(&imax);
    if (out.eigenvectors(imax, i) < 0.0) {
      out.eigenvectors.col(i) = -out.eigenvectors.col(i);
    }
  }
  return out;
}

struct SvdResult {
  Mat6 U;
  Vec6 singular_values;  // descending, non-negative
  Mat6 V;
};

inline SvdResult svd6(const Mat6& a) {
  Eigen::JacobiSVD<Mat6> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return SvdResult{svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// Minimum-norm least-squares solve of A x = b. Singular values below
/// rank_tol * sigma_max contribute zero (their reciprocal is truncated), so
/// the solution has no component along near-null directions.
inline Vec6 svd_solve(const Mat6& a, const Vec6& b, double rank_tol = 1e-10) {
  SvdResult s = svd6(a);
  double smax = s.singular_values(0);
  Vec6 x = Vec6::Zero();
  if (smax <= 0.0) return x;
  double cut = rank_tol * smax;
  for (int i = 0; i < 6; ++i) {
    double sv = s.singular_values(i);
    if (sv >= cut && sv > 0.0) {
      x += (s.U.col(i).dot(b) / sv) * s.V.col(i);
    }
  }
  return x;
}

/// Minimum-norm least-squares solve for dynamic systems (KKT blocks).
inline Eigen::VectorXd svd_solve_dyn(const Eigen::MatrixXd& a,
                                     const Eigen::VectorXd& b,
                                     double rank_tol = 1e-12) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(rank_tol);
  return svd.solve(b);
}

/// Rodrigues' formula; exact for any rotation vector.
inline Mat3 exp_so3(const Vec3& r) {
  double theta2 = r.squaredNorm();
  double theta = std::sqrt(theta2);
  Mat3 k = hat(r);
  if (theta < 1e-8) {
    // Second-order series; error O(theta^3) is below double round-off here.
    return Mat3::Identity() + k + 0.5 * (k * k);
  }
  double a = std::sin(theta) / theta;
  double b = (1.0 - std::cos(theta)) / theta2;
  return Mat3::Identity() + a * k + b * (k * k);
}

/// Rotation vector of R; inverse of exp_so3 for angles in [0, pi].
inline Vec3 log_so3(const Mat3& r) {
  double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  double theta = std::acos(c);
  Vec3 axis_raw(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (theta < 1e-8) {
    return 0.5 * axis_raw;  // first-order
  }
  if (theta > M_PI - 1e-6) {
    // Near pi the skew part vanishes; recover the axis from the symmetric part.
    Mat3 s = 0.5 * (r + Mat3::Identity());  // axis outer product at theta = pi
    int imax = 0;
    s.diagonal().maxCoeff(&imax);
    Vec3 axis = s.col(imax) / std::sqrt(std::max(s(imax, imax), 1e-300));
    axis.normalize();
    // Fix the sign using the (possibly tiny) skew part.
    if (axis.dot(axis_raw) < 0.0) axis = -axis;
    return theta * axis;
  }
  return (theta / (2.0 * std::sin(theta))) * axis_raw;
}

/// Right Jacobian of SO(3): exp(r + d) == exp(r) * exp(Jr(r) d) to first order.
inline Mat3 right_jacobian_so3(const Vec3& r) {
  double theta2 = r.squaredNorm();
  double theta = std::sqrt(theta2);
  Mat3 k = hat(r);
  if (theta < 1e-5) {
    return Mat3::Identity() - 0.5 * k + (1.0 / 6.0) * (k * k);
  }
  double a = (1.0 - std::cos(theta)) / theta2;
  double b = (theta - std::sin(theta)) / (theta2 * theta);
  return Mat3::Identity() - a * k + b * (k * k);
}

/// Nearest rotation matrix in Frobenius norm (polar factor via SVD).
inline Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) {
    u.col(2) = -u.col(2);
  }
  return u * v.transpose();
}

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return RigidTransform{}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  RigidTransform inverse() const {
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.translation = -(rotation.transpose() * translation);
    return out;
  }

  RigidTransform operator*(const RigidTransform& rhs) const {
    RigidTransform out;
    out.rotation = rotation * rhs.rotation;
    out.translation = rotation * rhs.translation + translation;
    return out;
  }
};

/// Applies the solved increment x = [r; t] on the left, in the map frame:
/// T_new = (exp(hat(r)), t) o T. This matches the linearization, which
/// rotates already-transformed points about the map origin. The rotation
/// uses the exact exponential map and is re-orthonormalized so that repeated
/// application cannot drift off the manifold. Expects ||r|| < pi.
inline RigidTransform apply_increment(const RigidTransform& t, const Vec6& x) {
  Mat3 dr = exp_so3(x.head<3>());
  RigidTransform out;
  out.rotation = orthonormalize(dr * t.rotation);
  out.translation = dr * t.translation + x.tail<3>();
  return out;
}

struct PoseError {
  double rot = 0.0;    // radians, geodesic angle
  double trans = 0.0;  // meters, Euclidean
};

inline PoseError pose_error(const RigidTransform& est, const RigidTransform& gt) {
  PoseError e;
  double c = ((est.rotation.transpose() * gt.rotation).trace() - 1.0) * 0.5;
  e.rot = std::acos(std::clamp(c, -1.0, 1.0));
  e.trans = (est.translation - gt.translation).norm();
  return e;
}

/// Signed rotation error component about a fixed axis (map frame).
inline double rotation_error_about(const RigidTransform& est,
                                   const RigidTransform& gt, const Vec3& axis) {
  return log_so3(gt.rotation.transpose() * est.rotation).dot(axis);
}

}  // namespace dmicp
