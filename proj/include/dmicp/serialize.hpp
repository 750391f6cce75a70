// JSON and CSV interchange. All floating-point output is printed with
// %.17g so values round-trip exactly and reruns produce byte-identical
// files; wall-clock columns are the only nondeterministic payload and
// consumers are expected to ignore them when comparing runs.
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmicp/core.hpp"
#include "dmicp/degeneracy.hpp"
#include "dmicp/icp.hpp"
#include "dmicp/linalg.hpp"
#include "dmicp/metrics.hpp"
#include "dmicp/mitigation.hpp"
#include "dmicp/point_cloud.hpp"
#include "dmicp/simulation.hpp"

namespace dmicp {

using nlohmann::json;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError("expected a 3-element array");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline json to_json(const RigidTransform& t) {
  return json{{"rotation_vector", to_json(log_so3(t.rotation))},
              {"translation", to_json(t.translation)}};
}

inline RigidTransform transform_from_json(const json& j) {
  RigidTransform t;
  if (j.contains("rotation_vector")) {
    t.rotation = exp_so3(vec3_from_json(j.at("rotation_vector")));
  }
  if (j.contains("translation")) {
    t.translation = vec3_from_json(j.at("translation"));
  }
  return t;
}

inline json to_json(const LocalizabilityReport& rep) {
  json eig_rot = json::array(), eig_trans = json::array();
  json vec_rot = json::array(), vec_trans = json::array();
  for (int i = 0; i < 3; ++i) {
    eig_rot.push_back(rep.eig_rot.eigenvalues(i));
    eig_trans.push_back(rep.eig_trans.eigenvalues(i));
    vec_rot.push_back(to_json(Vec3(rep.eig_rot.eigenvectors.col(i))));
    vec_trans.push_back(to_json(Vec3(rep.eig_trans.eigenvectors.col(i))));
  }
  json rows = json::array();
  json kinds = json::array();
  for (Eigen::Index r = 0; r < rep.constraint_rows.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < 6; ++c) row.push_back(rep.constraint_rows(r, c));
    rows.push_back(row);
    kinds.push_back(rep.row_kinds[static_cast<std::size_t>(r)] ==
                            ConstraintKind::Rotational
                        ? "rotational"
                        : "translational");
  }
  return json{{"rot_eigenvalues", eig_rot},
              {"trans_eigenvalues", eig_trans},
              {"rot_eigenvectors", vec_rot},
              {"trans_eigenvectors", vec_trans},
              {"degenerate_rot", rep.degenerate_rot},
              {"degenerate_trans", rep.degenerate_trans},
              {"constraint_rows", rows},
              {"row_kinds", kinds},
              {"threshold_used", rep.threshold_used}};
}

inline json to_json(const ErrorStats& s, bool with_series = true) {
  json out{{"mean", s.mean}, {"stddev", s.stddev}, {"max", s.max}};
  if (with_series) out["series"] = s.series;
  return out;
}

inline json to_json(const AteResult& r, bool with_series = true) {
  return json{{"trans", to_json(r.trans, with_series)},
              {"rot", to_json(r.rot, with_series)}};
}

inline json to_json(const Trajectory& t) {
  json poses = json::array();
  for (const auto& p : t.poses) poses.push_back(to_json(p));
  return json{{"timestamps", t.timestamps}, {"poses", poses}};
}

inline Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.timestamps = j.at("timestamps").get<std::vector<double>>();
  for (const auto& p : j.at("poses")) t.poses.push_back(transform_from_json(p));
  t.check();
  return t;
}

/// Per-iteration CSV. Schema (stable, see README): iteration, wall_time_s,
/// residual_cost, n_correspondences, rot_increment_norm,
/// trans_increment_norm, rot_error, trans_error, n_constraints,
/// degm_0..degm_5. Absent ground-truth errors are empty cells, not zeros.
inline std::string records_to_csv(const std::vector<IterationRecord>& records) {
  std::ostringstream out;
  out << "iteration,wall_time_s,residual_cost,n_correspondences,"
         "rot_increment_norm,trans_increment_norm,rot_error,trans_error,"
         "n_constraints,degm_0,degm_1,degm_2,degm_3,degm_4,degm_5\n";
  for (const auto& r : records) {
    out << r.iteration << ',' << format_double(r.wall_time_s) << ','
        << format_double(r.residual_cost) << ',' << r.n_correspondences << ','
        << format_double(r.rot_increment_norm) << ','
        << format_double(r.trans_increment_norm) << ',';
    if (r.rot_error) out << format_double(*r.rot_error);
    out << ',';
    if (r.trans_error) out << format_double(*r.trans_error);
    out << ',' << r.n_constraints;
    for (double m : r.degenerate_motion) out << ',' << format_double(m);
    out << '\n';
  }
  return out.str();
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw ConfigError("write failed: " + path.string());
}

/// FNV-1a over raw bytes; used to prove every method saw identical inputs.
class InputHasher {
 public:
  void add_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void add(double v) { add_bytes(&v, sizeof(v)); }
  void add(const Vec3& v) {
    add(v.x());
    add(v.y());
    add(v.z());
  }
  void add(const RigidTransform& t) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) add(t.rotation(r, c));
    add(t.translation);
  }
  void add(const PointCloud& cloud) {
    for (const auto& p : cloud.points) add(p);
    for (const auto& n : cloud.normals) add(n);
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace dmicp
