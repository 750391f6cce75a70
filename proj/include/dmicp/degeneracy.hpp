// Localizability analysis of the Gauss-Newton system. The 6x6 matrix A is
// split into its rotational sub-block A_rr (top-left, state indices 0-2) and
// translational sub-block A_tt (bottom-right, indices 3-5); each is
// eigendecomposed separately so a weak direction keeps a physical meaning
// (a rotation axis or a translation direction). A direction is degenerate
// when its eigenvalue falls below the threshold, absolute or relative to
// the largest eigenvalue of its own sub-block.
#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "dmicp/core.hpp"
#include "dmicp/linalg.hpp"
#include "dmicp/linearize.hpp"

namespace dmicp {

enum class ThresholdMode { Absolute, RelativeToMax };

struct DetectionConfig {
  double eigenvalue_threshold = 1e-3;
  ThresholdMode mode = ThresholdMode::RelativeToMax;
};

enum class ConstraintKind { Rotational, Translational };

/// Embeds a 3-D sub-block eigenvector into the 6-D state: rotational
/// directions occupy indices 0-2, translational 3-5. Expects v to be unit.
inline Vec6 lift_to_6d(const Vec3& v, ConstraintKind kind) {
  if (std::abs(v.norm() - 1.0) > 1e-9) {
    throw NotUnit("lift_to_6d: |v| = " + std::to_string(v.norm()));
  }
  Vec6 out = Vec6::Zero();
  if (kind == ConstraintKind::Rotational) {
    out.head<3>() = v;
  } else {
    out.tail<3>() = v;
  }
  return out;
}

struct LocalizabilityReport {
  SymEig3 eig_rot;
  SymEig3 eig_trans;
  std::array<bool, 3> degenerate_rot{};    // per descending-eigenvalue slot
  std::array<bool, 3> degenerate_trans{};
  // Lifted 6-D unit rows of the flagged directions, rotational rows first,
  // each group in descending-eigenvalue order of its sub-block.
  RowMat6 constraint_rows;
  std::vector<ConstraintKind> row_kinds;  // parallel to constraint_rows
  double threshold_used = 0.0;            // configured threshold value

  int c() const { return static_cast<int>(constraint_rows.rows()); }
  bool any() const { return c() > 0; }
};

inline LocalizabilityReport detect(const NormalEquations& ne,
                                   const DetectionConfig& cfg = {}) {
  LocalizabilityReport rep;
  Mat3 a_rr = ne.A.topLeftCorner<3, 3>();
  Mat3 a_tt = ne.A.bottomRightCorner<3, 3>();
  rep.eig_rot = sym_eig<3>(a_rr);
  rep.eig_trans = sym_eig<3>(a_tt);
  rep.threshold_used = cfg.eigenvalue_threshold;

  auto flag = [&](const SymEig3& eig, std::array<bool, 3>& flags) {
    double cut = cfg.eigenvalue_threshold;
    if (cfg.mode == ThresholdMode::RelativeToMax) {
      cut *= std::max(eig.eigenvalues(0), 0.0);
    }
    for (int i = 0; i < 3; ++i) flags[i] = eig.eigenvalues(i) < cut;
  };
  flag(rep.eig_rot, rep.degenerate_rot);
  flag(rep.eig_trans, rep.degenerate_trans);

  std::vector<Vec6> rows;
  std::vector<ConstraintKind> kinds;
  for (int i = 0; i < 3; ++i) {
    if (rep.degenerate_rot[i]) {
      rows.push_back(lift_to_6d(rep.eig_rot.eigenvectors.col(i).normalized(),
                                ConstraintKind::Rotational));
      kinds.push_back(ConstraintKind::Rotational);
    }
  }
  for (int i = 0; i < 3; ++i) {
    if (rep.degenerate_trans[i]) {
      rows.push_back(lift_to_6d(rep.eig_trans.eigenvectors.col(i).normalized(),
                                ConstraintKind::Translational));
      kinds.push_back(ConstraintKind::Translational);
    }
  }
  rep.constraint_rows.resize(static_cast<Eigen::Index>(rows.size()), 6);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rep.constraint_rows.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  rep.row_kinds = std::move(kinds);
  return rep;
}

}  // namespace dmicp
