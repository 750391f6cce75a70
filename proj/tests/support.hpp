// Shared fixtures and oracles for the test suite. Scene constants here are
// frozen; changing them invalidates tolerances that were derived from them.
#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dmicp/dmicp.hpp"

namespace support {

using namespace dmicp;

// ---------------------------------------------------------------------------
// Filesystem helpers.

class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "dmicp-test-XXXXXX")
            .string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) {
      throw std::runtime_error("mkdtemp failed");
    }
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// Removes the wall_time_s column from an iteration CSV so runs can be
// compared byte-for-byte.
inline std::string strip_wall_column(const std::string& csv) {
  std::vector<std::string> lines = split_lines(csv);
  if (lines.empty()) return csv;
  std::vector<std::string> header;
  std::istringstream hin(lines[0]);
  std::string cell;
  int wall_idx = -1;
  int idx = 0;
  while (std::getline(hin, cell, ',')) {
    if (cell == "wall_time_s") wall_idx = idx;
    header.push_back(cell);
    ++idx;
  }
  if (wall_idx < 0) return csv;
  std::ostringstream out;
  for (const std::string& line : lines) {
    std::istringstream lin(line);
    std::vector<std::string> cells;
    while (std::getline(lin, cell, ',')) cells.push_back(cell);
    bool first = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (static_cast<int>(i) == wall_idx) continue;
      if (!first) out << ',';
      out << cells[i];
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

#ifdef DMICP_CLI_PATH
inline int run_cli(const std::vector<std::string>& args,
                   const std::string& capture_path = "") {
  std::string cmd = DMICP_CLI_PATH;
  for (const std::string& a : args) cmd += " '" + a + "'";
  if (!capture_path.empty()) {
    cmd += " >" + capture_path + " 2>&1";
  } else {
    cmd += " >/dev/null 2>&1";
  }
  int ret = std::system(cmd.c_str());
  if (ret < 0) return -1;
  return WEXITSTATUS(ret);
}
#endif

// ---------------------------------------------------------------------------
// Random generators built on the library PRNG.

inline Vec3 random_unit_vec(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  while (v.norm() < 1e-6) v = Vec3(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

inline Mat3 random_rotation(Rng& rng) {
  return exp_so3(rng.uniform(0.0, M_PI) * random_unit_vec(rng));
}

// Symmetric PD with log-uniform eigenvalues in [10^lo_exp, 10^hi_exp].
inline Mat6 random_pd6(Rng& rng, double lo_exp, double hi_exp) {
  Mat6 m = Mat6::Zero();
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) m(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat6> qr(m);
  Mat6 q = qr.householderQ();
  Vec6 eig;
  for (int i = 0; i < 6; ++i)
    eig(i) = std::pow(10.0, rng.uniform(lo_exp, hi_exp));
  return q * eig.asDiagonal() * q.transpose();
}

inline RowMat6 random_orthonormal_rows(Rng& rng, int c) {
  Eigen::MatrixXd m(6, c);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(6, c);
  return q.transpose();
}

// ---------------------------------------------------------------------------
// Scene builders.

inline PointCloud box_surface(std::uint64_t seed, int n,
                              const Vec3& size = Vec3(4.0, 3.0, 2.0)) {
  Rng rng(seed);
  return sample_box_surface(Vec3::Zero(), size, n, rng);
}

// Box surface samples carrying the exact face normal of each point.
inline PointCloud box_surface_with_normals(
    std::uint64_t seed, int n, const Vec3& size = Vec3(4.0, 3.0, 2.0)) {
  PointCloud c = box_surface(seed, n, size);
  c.normals.resize(c.size());
  c.degenerate_normal.assign(c.size(), 0);
  Vec3 half = 0.5 * size;
  for (std::size_t i = 0; i < c.size(); ++i) {
    Vec3 nrm = Vec3::Zero();
    for (int a = 0; a < 3; ++a) {
      if (std::abs(std::abs(c.points[i](a)) - half(a)) < 1e-12) {
        nrm(a) = c.points[i](a) > 0 ? 1.0 : -1.0;
        break;
      }
    }
    c.normals[i] = nrm;
  }
  return c;
}

struct StaticScene {
  PointCloud source;     // displaced by the inverse perturbation
  PointCloud reference;  // independent draw, normals estimated (k = 10)
  RigidTransform gt;     // perturbation the registration must recover
};

// Noisy vertical cylinder pair; the Z rotation (and, without a large cap,
// Z translation) is observable only through noise.
inline StaticScene make_static_scene(int n_points, double sigma, int cap) {
  CylinderSpec cyl;
  cyl.radius = 1.0;
  cyl.height = 4.0;
  cyl.n_points = n_points;
  cyl.noise_sigma = sigma;
  cyl.cap_points = cap;
  RigidTransform pert;
  pert.rotation = exp_so3(Vec3(0.015, 0.0, 0.0));
  pert.translation = Vec3(0.25, 0.15, 0.0);
  StaticScene scene;
  scene.gt = pert;
  PointCloud src_raw = sample_cylinder(cyl, derive_stream(7, "static-source"));
  scene.source = transform_cloud(src_raw, pert.inverse());
  PointCloud ref_raw =
      sample_cylinder(cyl, derive_stream(7, "static-reference"));
  scene.reference = estimate_normals(ref_raw, 10);
  return scene;
}

// Full-rank correspondence set: random normals over scattered points.
inline CorrespondenceSet full_rank_corr(int scene_index) {
  Rng rng(derive_stream(55, "c2-" + std::to_string(scene_index)));
  CorrespondenceSet corr;
  for (int i = 0; i < 60; ++i) {
    Vec3 p(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    Vec3 nv = random_unit_vec(rng);
    corr.source_pts.push_back(p);
    corr.ref_pts.push_back(
        p + 0.05 * Vec3(rng.normal(), rng.normal(), rng.normal()));
    corr.ref_normals.push_back(nv);
    corr.distances.push_back(0.0);
    corr.ref_indices.push_back(i);
  }
  return corr;
}

struct DegenerateSystem {
  NormalEquations ne;
  LocalizabilityReport rep;
};

// Rank-deficient systems from four exact-null geometries (axis plane,
// rotated plane, axis cylinder, rotated cylinder with cap), with the
// gradient contaminated along each flagged direction. Contamination is kept
// near 1e-4 * trace(A) so active-set arithmetic stays well below the
// stated bound tolerances while the constraints still activate.
inline DegenerateSystem degenerate_system(int scene_index) {
  Rng rng(derive_stream(77, "c3-" + std::to_string(scene_index)));
  CorrespondenceSet corr;
  int family = scene_index % 4;
  Mat3 rot = exp_so3(Vec3(rng.normal(), rng.normal(), rng.normal()));
  int n = 120 + static_cast<int>(rng.uniform_index(120));
  for (int i = 0; i < n; ++i) {
    Vec3 p, nrm;
    if (family == 0 || family == 1) {
      p = Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0.5, 0.7));
      nrm = Vec3(0, 0, 1);
      if (family == 1) {
        p = rot * p;
        nrm = rot * nrm;
      }
    } else {
      double th = rng.uniform(0, 2 * M_PI);
      double r = 1.5;
      if (family == 3 && i % 3 == 0) {
        double rr = r * std::sqrt(rng.uniform(0, 1));
        p = Vec3(rr * std::cos(th), rr * std::sin(th), -1.0);
        nrm = Vec3(0, 0, 1);
      } else {
        p = Vec3(r * std::cos(th), r * std::sin(th), rng.uniform(-1, 1));
        nrm = Vec3(std::cos(th), std::sin(th), 0);
      }
      if (family == 3) {
        p = rot * p;
        nrm = rot * nrm;
      }
    }
    corr.source_pts.push_back(p);
    corr.ref_pts.push_back(p);
    corr.ref_normals.push_back(nrm);
    corr.distances.push_back(0.0);
    corr.ref_indices.push_back(i);
  }
  DegenerateSystem sys;
  sys.ne = build_normal_equations(build_rows(corr));
  sys.rep = detect(sys.ne);
  Vec6 y;
  for (int i = 0; i < 6; ++i) y(i) = 0.1 * rng.normal();
  Vec6 b = sys.ne.A * y;
  for (int j = 0; j < sys.rep.c(); ++j) {
    Vec6 v = sys.rep.constraint_rows.row(j).transpose();
    b += rng.uniform(2e-5, 1e-4) * (rng.uniform() < 0.5 ? -1.0 : 1.0) *
         sys.ne.A.trace() * v;
  }
  sys.ne.b = b;
  return sys;
}

// ---------------------------------------------------------------------------
// Long-double accumulation oracle for the normal equations.

struct AccumulatedSystem {
  Mat6 A;
  Vec6 b;
};

inline AccumulatedSystem accumulate_long_double(const ResidualRows& rows) {
  long double acc_a[6][6] = {};
  long double acc_b[6] = {};
  for (Eigen::Index r = 0; r < rows.rows.rows(); ++r) {
    long double a[6];
    for (int i = 0; i < 6; ++i) a[i] = rows.rows(r, i);
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) acc_a[i][j] += a[i] * a[j];
      acc_b[i] += a[i] * static_cast<long double>(rows.residuals(r));
    }
  }
  AccumulatedSystem out;
  for (int i = 0; i < 6; ++i) {
    out.b(i) = static_cast<double>(acc_b[i]);
    for (int j = 0; j < 6; ++j)
      out.A(i, j) = static_cast<double>(acc_a[i][j]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Box-QP oracles. Both work in rotated coordinates y = B x where the first
// c coordinates are the constrained ones; B has orthonormal rows built from
// the constraint rows and their orthogonal complement.

struct RotatedQp {
  Eigen::MatrixXd B;  // 6x6, first c rows are the constraint rows
  Mat6 G;             // B F B^T
  Vec6 g;             // B f
  int c = 0;
};

inline RotatedQp rotate_qp(const QpProblem& prob) {
  RotatedQp out;
  out.c = static_cast<int>(prob.L.rows());
  Eigen::MatrixXd lt = prob.L.transpose();  // 6 x c
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(lt);
  Eigen::MatrixXd q = qr.householderQ();  // 6 x 6
  out.B = Eigen::MatrixXd(6, 6);
  for (int j = 0; j < out.c; ++j) out.B.row(j) = prob.L.row(j);
  // Last 6-c columns of Q span the complement of the row space.
  for (int j = out.c; j < 6; ++j) out.B.row(j) = q.col(j).transpose();
  out.G = out.B * prob.F * out.B.transpose();
  out.g = out.B * prob.f;
  return out;
}

inline double qp_objective(const QpProblem& prob, const Vec6& x) {
  return 0.5 * x.dot(prob.F * x) + prob.f.dot(x);
}

// Exhaustive active-set oracle: tries every {lower, upper, free} assignment
// of the constrained coordinates and returns the KKT-consistent candidate
// with the lowest objective.
inline Vec6 enumeration_oracle(const QpProblem& prob) {
  RotatedQp rq = rotate_qp(prob);
  const int c = rq.c;
  int n_combo = 1;
  for (int j = 0; j < c; ++j) n_combo *= 3;
  double best_obj = std::numeric_limits<double>::infinity();
  Vec6 best_x = Vec6::Zero();
  const double tol = 1e-9;
  for (int combo = 0; combo < n_combo; ++combo) {
    int digits = combo;
    std::vector<int> state(c);  // 0 lower, 1 upper, 2 free
    for (int j = 0; j < c; ++j) {
      state[j] = digits % 3;
      digits /= 3;
    }
    std::vector<int> free_idx;
    Vec6 y = Vec6::Zero();
    bool skip = false;
    for (int j = 0; j < c; ++j) {
      if (state[j] == 0) {
        y(j) = prob.lower(j);
      } else if (state[j] == 1) {
        if (prob.upper(j) == prob.lower(j)) skip = true;  // duplicate combo
        y(j) = prob.upper(j);
      } else {
        free_idx.push_back(j);
      }
    }
    if (skip) continue;
    for (int j = c; j < 6; ++j) free_idx.push_back(j);
    const int nf = static_cast<int>(free_idx.size());
    if (nf > 0) {
      Eigen::MatrixXd gff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int a = 0; a < nf; ++a) {
        rhs(a) = -rq.g(free_idx[a]);
        for (int b = 0; b < nf; ++b) gff(a, b) = rq.G(free_idx[a], free_idx[b]);
        for (int j = 0; j < c; ++j) {
          if (state[j] != 2) rhs(a) -= rq.G(free_idx[a], j) * y(j);
        }
      }
      Eigen::VectorXd yf = gff.ldlt().solve(rhs);
      for (int a = 0; a < nf; ++a) y(free_idx[a]) = yf(a);
    }
    bool ok = true;
    Vec6 grad = rq.G * y + rq.g;
    for (int j = 0; j < c && ok; ++j) {
      if (state[j] == 2) {
        if (y(j) < prob.lower(j) - tol || y(j) > prob.upper(j) + tol)
          ok = false;
      } else if (state[j] == 0) {
        // Equality rows (lower == upper) carry a sign-free multiplier.
        if (prob.upper(j) > prob.lower(j) && grad(j) < -tol) ok = false;
      } else {
        if (grad(j) > tol) ok = false;  // multiplier of y <= upper
      }
    }
    if (!ok) continue;
    Vec6 x = rq.B.transpose() * y;
    double obj = qp_objective(prob, x);
    if (obj < best_obj) {
      best_obj = obj;
      best_x = x;
    }
  }
  return best_x;
}

// Accelerated projected-gradient oracle (FISTA with function restart) on the
// rotated coordinates, where the feasible set is a separable box.
inline Vec6 projected_gradient_oracle(const QpProblem& prob,
                                      int iterations = 20000) {
  RotatedQp rq = rotate_qp(prob);
  SymEig6 eig = sym_eig<6>(rq.G);
  double lip = std::max(eig.eigenvalues(0), 1e-12);
  auto project = [&](Vec6 y) {
    for (int j = 0; j < rq.c; ++j) {
      y(j) = std::min(std::max(y(j), prob.lower(j)), prob.upper(j));
    }
    return y;
  };
  auto value = [&](const Vec6& y) { return 0.5 * y.dot(rq.G * y) + rq.g.dot(y); };
  Vec6 y = project(Vec6::Zero());
  Vec6 z = y;
  double t = 1.0;
  double prev_val = value(y);
  for (int k = 0; k < iterations; ++k) {
    Vec6 y_next = project(z - (1.0 / lip) * (rq.G * z + rq.g));
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = y_next + ((t - 1.0) / t_next) * (y_next - y);
    double val = value(y_next);
    if (val > prev_val) {  // restart momentum on objective increase
      t_next = 1.0;
      z = y_next;
    }
    prev_val = val;
    y = y_next;
    t = t_next;
  }
  return rq.B.transpose() * y;
}

// Random box QP with controlled conditioning; never triggers the solver's
// semidefinite floor.
inline QpProblem random_box_qp(int index) {
  Rng rng(derive_stream(4242, "qp-" + std::to_string(index)));
  QpProblem qp;
  qp.F = random_pd6(rng, -2.0, 2.0);
  for (int i = 0; i < 6; ++i) qp.f(i) = rng.normal();
  int c = 1 + static_cast<int>(rng.uniform_index(6));
  qp.L = random_orthonormal_rows(rng, c);
  qp.lower.resize(c);
  qp.upper.resize(c);
  for (int j = 0; j < c; ++j) {
    double center = rng.uniform(-0.1, 0.1);
    double w = rng.uniform(0.001, 0.2);
    if (rng.uniform() < 0.1) w = 0.0;  // occasional equality box
    qp.lower(j) = center - w;
    qp.upper(j) = center + w;
  }
  return qp;
}

}  // namespace support
