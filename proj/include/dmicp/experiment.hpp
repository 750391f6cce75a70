// Experiment drivers behind the CLI. Config is a single JSON document; the
// subcommand picks the driver. Every method inside one experiment consumes
// the same generated scene, priors, and noise draws, and an FNV-1a hash of
// those inputs is written per method so identical-input runs are checkable
// from the outputs alone. Exit codes: 0 success, 1 at least one method
// failed (outputs for the others are still written), 2 config error.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dmicp/cloud.hpp"
#include "dmicp/icp.hpp"
#include "dmicp/metrics.hpp"
#include "dmicp/ply_io.hpp"
#include "dmicp/serialize.hpp"
#include "dmicp/simulation.hpp"

namespace dmicp {

struct ExperimentConfig {
  std::string experiment = "static";  // static | dynamic | sweep
  std::uint64_t seed = 1234;
  std::string output_dir = "out";
  std::vector<MethodKind> methods = all_methods();
  int normals_k = 10;
  double rte_delta = 1.0;

  std::string scene_type = "cylinder";  // cylinder | pillar
  CylinderSpec cylinder;
  RigidTransform perturbation;  // static scene ground truth
  PillarSpec pillar;

  NoiseSpec noise;
  IcpConfig icp;

  std::string sweep_parameter;
  std::vector<double> sweep_values;
};

namespace detail {

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void get_if_vec3(const json& j, const char* key, Vec3& out) {
  if (j.contains(key)) out = vec3_from_json(j.at(key));
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    detail::get_if(j, "experiment", cfg.experiment);
    detail::get_if(j, "seed", cfg.seed);
    detail::get_if(j, "output_dir", cfg.output_dir);
    detail::get_if(j, "normals_k", cfg.normals_k);
    detail::get_if(j, "rte_delta", cfg.rte_delta);
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : j.at("methods")) {
        cfg.methods.push_back(method_from_string(m.get<std::string>()));
      }
    }
    if (j.contains("scenario")) {
      const json& s = j.at("scenario");
      detail::get_if(s, "type", cfg.scene_type);
      detail::get_if(s, "radius", cfg.cylinder.radius);
      detail::get_if(s, "height", cfg.cylinder.height);
      detail::get_if(s, "n_points", cfg.cylinder.n_points);
      detail::get_if(s, "noise_sigma", cfg.cylinder.noise_sigma);
      detail::get_if(s, "cap_points", cfg.cylinder.cap_points);
      if (s.contains("perturbation")) {
        cfg.perturbation = transform_from_json(s.at("perturbation"));
      }
      detail::get_if(s, "plane_extent", cfg.pillar.plane_extent);
      detail::get_if_vec3(s, "pillar_size", cfg.pillar.pillar_size);
      detail::get_if_vec3(s, "pillar_center", cfg.pillar.pillar_center);
      detail::get_if(s, "n_map_points", cfg.pillar.n_map_points);
      detail::get_if(s, "scan_point_count", cfg.pillar.scan_point_count);
      detail::get_if(s, "sensor_range", cfg.pillar.sensor_range);
      detail::get_if(s, "plane_noise_sigma", cfg.pillar.plane_noise_sigma);
      detail::get_if(s, "scan_noise_sigma", cfg.pillar.scan_noise_sigma);
      if (s.contains("trajectory")) {
        cfg.pillar.trajectory.clear();
        for (const auto& p : s.at("trajectory")) {
          cfg.pillar.trajectory.push_back(transform_from_json(p));
        }
      } else if (s.contains("trajectory_line")) {
        const json& tl = s.at("trajectory_line");
        cfg.pillar.trajectory = make_line_trajectory(
            vec3_from_json(tl.at("start")), vec3_from_json(tl.at("end")),
            tl.at("n_poses").get<int>());
      }
    }
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      detail::get_if(n, "sigma_t", cfg.noise.sigma_t);
      detail::get_if(n, "sigma_r", cfg.noise.sigma_r);
      detail::get_if(n, "seed", cfg.noise.seed);
    }
    if (j.contains("icp")) {
      const json& ic = j.at("icp");
      detail::get_if(ic, "max_iterations", cfg.icp.max_iterations);
      detail::get_if(ic, "trans_convergence", cfg.icp.trans_convergence);
      detail::get_if(ic, "rot_convergence", cfg.icp.rot_convergence);
      detail::get_if(ic, "keep_ratio", cfg.icp.keep_ratio);
      detail::get_if(ic, "detect_every_iteration",
                     cfg.icp.detect_every_iteration);
      if (ic.contains("detection")) {
        const json& d = ic.at("detection");
        detail::get_if(d, "eigenvalue_threshold",
                       cfg.icp.detection.eigenvalue_threshold);
        std::string mode;
        detail::get_if(d, "mode", mode);
        if (mode == "absolute") {
          cfg.icp.detection.mode = ThresholdMode::Absolute;
        } else if (mode == "relative" || mode.empty()) {
          cfg.icp.detection.mode = ThresholdMode::RelativeToMax;
        } else {
          throw ConfigError("detection mode must be absolute or relative");
        }
      }
      if (ic.contains("mitigation")) {
        const json& m = ic.at("mitigation");
        MitigationConfig& mc = cfg.icp.mitigation;
        detail::get_if(m, "epsilon", mc.epsilon);
        detail::get_if(m, "lambda_lreg", mc.lambda_lreg);
        detail::get_if(m, "lambda_nlreg", mc.lambda_nlreg);
        detail::get_if(m, "kappa", mc.kappa);
        detail::get_if(m, "tsvd_floor", mc.tsvd_floor);
        detail::get_if(m, "max_irls_rounds", mc.max_irls_rounds);
        detail::get_if(m, "irls_x_tolerance", mc.irls_x_tolerance);
        if (m.contains("lm")) {
          const json& lm = m.at("lm");
          LmConfig& lc = mc.lm;
          detail::get_if(lm, "parameter_tolerance", lc.parameter_tolerance);
          detail::get_if(lm, "function_tolerance", lc.function_tolerance);
          detail::get_if(lm, "gradient_tolerance", lc.gradient_tolerance);
          detail::get_if(lm, "initial_damping", lc.initial_damping);
          detail::get_if(lm, "damping_increase", lc.damping_increase);
          detail::get_if(lm, "damping_decrease", lc.damping_decrease);
          detail::get_if(lm, "trust_region_radius", lc.trust_region_radius);
          detail::get_if(lm, "max_inner_iterations", lc.max_inner_iterations);
        }
      }
    }
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      detail::get_if(s, "parameter", cfg.sweep_parameter);
      detail::get_if(s, "values", cfg.sweep_values);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    // nlohmann reports byte offset; forward it.
    throw ParseError(std::string("config ") + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.experiment != "static" && cfg.experiment != "dynamic" &&
      cfg.experiment != "sweep") {
    throw ConfigError("experiment must be static, dynamic, or sweep");
  }
  if (cfg.methods.empty()) throw ConfigError("methods list is empty");
  if (cfg.scene_type != "cylinder" && cfg.scene_type != "pillar") {
    throw ConfigError("scenario type must be cylinder or pillar");
  }
  if (cfg.experiment == "static" && cfg.scene_type != "cylinder") {
    throw ConfigError("static experiment expects the cylinder scenario");
  }
  if (cfg.experiment != "static" && cfg.scene_type != "pillar") {
    throw ConfigError(cfg.experiment + " experiment expects the pillar scenario");
  }
  if (cfg.experiment != "static" && cfg.pillar.trajectory.empty()) {
    throw ConfigError("pillar scenario needs a trajectory");
  }
  if (cfg.experiment == "sweep") {
    if (cfg.methods.size() != 1) {
      throw ConfigError("sweep runs exactly one method");
    }
    if (cfg.sweep_values.empty()) throw ConfigError("sweep values are empty");
    static const std::map<std::string, MethodKind> tunable = {
        {"epsilon", MethodKind::IneqCon},
        {"lambda_lreg", MethodKind::LReg},
        {"lambda_nlreg", MethodKind::NlReg}};
    auto it = tunable.find(cfg.sweep_parameter);
    if (it == tunable.end()) {
      throw ConfigError("sweep parameter must be epsilon, lambda_lreg, or "
                        "lambda_nlreg");
    }
    if (cfg.methods[0] != it->second) {
      throw ConfigError(std::string("sweep parameter ") + cfg.sweep_parameter +
                        " does not apply to method " +
                        to_string(cfg.methods[0]));
    }
  }
}

namespace detail {

inline json result_summary_json(const RegistrationResult& res,
                                const std::optional<RigidTransform>& gt) {
  json out;
  out["pose"] = to_json(res.pose);
  out["converged"] = res.converged;
  out["failed"] = res.failed;
  if (res.failed) out["error"] = res.error;
  out["iterations"] = res.records.size();
  if (gt) {
    PoseError pe = pose_error(res.pose, *gt);
    out["rot_error"] = pe.rot;
    out["trans_error"] = pe.trans;
    out["rot_error_about_z"] =
        rotation_error_about(res.pose, *gt, Vec3::UnitZ());
  }
  out["first_report"] = to_json(res.first_report);
  out["final_report"] = to_json(res.final_report);
  return out;
}

}  // namespace detail

/// Cylinder registration experiment: two independent samplings of the same
/// cylinder, the reference transformed by the configured perturbation, one
/// registration per method from an identity prior. Writes one per-iteration
/// CSV and one aligned PLY per method plus scene PLYs and summary.json.
inline int run_static(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);

  // The source is displaced by the inverse perturbation so the reference
  // stays centered at the origin; an off-origin reference couples the
  // rotation and translation blocks of the normal equations.
  PointCloud src_raw =
      sample_cylinder(cfg.cylinder, derive_stream(cfg.seed, "static-source"));
  PointCloud source = transform_cloud(src_raw, cfg.perturbation.inverse());
  PointCloud ref_raw = sample_cylinder(
      cfg.cylinder, derive_stream(cfg.seed, "static-reference"));
  PointCloud reference = estimate_normals(ref_raw, cfg.normals_k);
  KdIndex index(reference);
  RigidTransform gt = cfg.perturbation;
  RigidTransform prior = RigidTransform::identity();

  InputHasher hasher;
  hasher.add(source);
  hasher.add(reference);
  hasher.add(prior);
  hasher.add(gt);
  std::uint64_t input_hash = hasher.value();

  save_ply(source, fs::path(cfg.output_dir) / "source.ply");
  save_ply(reference, fs::path(cfg.output_dir) / "reference.ply");

  json summary;
  summary["experiment"] = "static";
  summary["seed"] = cfg.seed;
  bool any_failed = false;
  for (MethodKind m : cfg.methods) {
    RegistrationResult res =
        register_clouds(source, reference, index, prior, m, cfg.icp, gt);
    any_failed = any_failed || res.failed;
    std::string name = to_string(m);
    write_text(fs::path(cfg.output_dir) / (name + ".csv"),
               records_to_csv(res.records));
    save_ply(transform_cloud(source, res.pose),
             fs::path(cfg.output_dir) / (name + "_aligned.ply"));
    json entry = detail::result_summary_json(res, gt);
    entry["input_hash"] = input_hash;
    summary["methods"][name] = entry;
    std::cerr << "[static] " << name << ": iters=" << res.records.size()
              << " converged=" << res.converged << "\n";
  }
  write_text(fs::path(cfg.output_dir) / "summary.json", summary.dump(2) + "\n");
  return any_failed ? 1 : 0;
}

struct DynamicMethodResult {
  Trajectory est;
  AteResult ate_result;
  AteResult rte_result;
  int n_failed = 0;
  double deg_motion_mean = 0.0;  // mean over poses of final cumulative motion
  std::vector<RegistrationResult> registrations;
};

struct DynamicSceneData {
  PillarScene scene;
  PointCloud map_with_normals;
  std::vector<RigidTransform> priors;
  Trajectory gt;
  std::uint64_t input_hash = 0;
};

inline DynamicSceneData prepare_dynamic_scene(const ExperimentConfig& cfg) {
  DynamicSceneData data;
  data.scene = make_pillar_scene(cfg.pillar, derive_stream(cfg.seed, "scene"));
  data.map_with_normals = estimate_normals(data.scene.map, cfg.normals_k);

  NoiseSpec noise = cfg.noise;
  if (noise.seed == 0) noise.seed = derive_stream(cfg.seed, "noise");
  NoiseSampler sampler(noise);
  for (std::size_t i = 0; i < data.scene.trajectory.size(); ++i) {
    data.priors.push_back(sampler.perturb(data.scene.trajectory[i]));
    data.gt.timestamps.push_back(static_cast<double>(i));
    data.gt.poses.push_back(data.scene.trajectory[i]);
  }

  InputHasher hasher;
  hasher.add(data.map_with_normals);
  for (const auto& s : data.scene.scans) hasher.add(s);
  for (const auto& p : data.priors) hasher.add(p);
  for (const auto& p : data.gt.poses) hasher.add(p);
  data.input_hash = hasher.value();
  return data;
}

inline DynamicMethodResult run_dynamic_method(const DynamicSceneData& data,
                                              const KdIndex& index,
                                              MethodKind method,
                                              const ExperimentConfig& cfg) {
  DynamicMethodResult out;
  double deg_sum = 0.0;
  for (std::size_t i = 0; i < data.scene.scans.size(); ++i) {
    RegistrationResult res =
        register_clouds(data.scene.scans[i], data.map_with_normals, index,
                        data.priors[i], method, cfg.icp, data.gt.poses[i]);
    if (res.failed) out.n_failed++;
    out.est.timestamps.push_back(static_cast<double>(i));
    out.est.poses.push_back(res.pose);
    if (!res.records.empty()) {
      const auto& motion = res.records.back().degenerate_motion;
      double total = 0.0;
      for (int j = 0; j < res.first_report.c() && j < 6; ++j) {
        total += motion[static_cast<std::size_t>(j)];
      }
      deg_sum += total;
    }
    out.registrations.push_back(std::move(res));
  }
  out.deg_motion_mean =
      data.scene.scans.empty()
          ? 0.0
          : deg_sum / static_cast<double>(data.scene.scans.size());
  out.ate_result = ate(out.est, data.gt);
  out.rte_result = rte(out.est, data.gt, cfg.rte_delta);
  return out;
}

/// Scan-to-map registration along the pillar trajectory. Priors are the
/// ground-truth poses perturbed by the configured noise, identical for all
/// methods. Writes per-method trajectory and stats JSON plus a registered
/// map PLY with per-point distance-to-map CSV.
inline int run_dynamic(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  DynamicSceneData data = prepare_dynamic_scene(cfg);
  KdIndex index(data.map_with_normals);

  json summary;
  summary["experiment"] = "dynamic";
  summary["seed"] = cfg.seed;
  bool any_failed = false;
  for (MethodKind m : cfg.methods) {
    DynamicMethodResult res = run_dynamic_method(data, index, m, cfg);
    any_failed = any_failed || res.n_failed > 0;
    std::string name = to_string(m);

    write_text(fs::path(cfg.output_dir) / (name + "_trajectory.json"),
               to_json(res.est).dump(2) + "\n");
    json stats{{"ate", to_json(res.ate_result)},
               {"rte", to_json(res.rte_result)},
               {"n_failed", res.n_failed},
               {"deg_motion_mean", res.deg_motion_mean},
               {"input_hash", data.input_hash}};
    write_text(fs::path(cfg.output_dir) / (name + "_stats.json"),
               stats.dump(2) + "\n");

    PointCloud registered;
    std::ostringstream err_csv;
    err_csv << "point_index,distance_to_map\n";
    std::size_t pi = 0;
    for (std::size_t i = 0; i < data.scene.scans.size(); ++i) {
      PointCloud world =
          transform_cloud(data.scene.scans[i], res.est.poses[i]);
      for (const Vec3& p : world.points) {
        registered.points.push_back(p);
        auto [idx, dist] = index.nearest(p);
        err_csv << pi++ << ',' << format_double(dist) << '\n';
      }
    }
    save_ply(registered, fs::path(cfg.output_dir) / (name + "_map.ply"));
    write_text(fs::path(cfg.output_dir) / (name + "_map_error.csv"),
               err_csv.str());

    json entry{{"ate", to_json(res.ate_result, false)},
               {"rte", to_json(res.rte_result, false)},
               {"n_failed", res.n_failed},
               {"deg_motion_mean", res.deg_motion_mean},
               {"input_hash", data.input_hash}};
    summary["methods"][name] = entry;
    std::cerr << "[dynamic] " << name
              << ": ate_trans_mean=" << res.ate_result.trans.mean
              << " failed=" << res.n_failed << "\n";
  }
  write_text(fs::path(cfg.output_dir) / "summary.json", summary.dump(2) + "\n");
  return any_failed ? 1 : 0;
}

/// One dynamic run per sweep value of the single tunable method, aggregated
/// into sweep.csv: value, ATE/RTE means, and the mean cumulative motion
/// along the degenerate directions.
inline int run_sweep(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  DynamicSceneData data = prepare_dynamic_scene(cfg);
  KdIndex index(data.map_with_normals);
  MethodKind method = cfg.methods.at(0);

  std::ostringstream csv;
  csv << "value,ate_trans_mean,ate_rot_mean,rte_trans_mean,rte_rot_mean,"
         "deg_motion_mean\n";
  bool any_failed = false;
  for (double value : cfg.sweep_values) {
    ExperimentConfig run_cfg = cfg;
    if (cfg.sweep_parameter == "epsilon") {
      run_cfg.icp.mitigation.epsilon = value;
    } else if (cfg.sweep_parameter == "lambda_lreg") {
      run_cfg.icp.mitigation.lambda_lreg = value;
    } else {
      run_cfg.icp.mitigation.lambda_nlreg = value;
    }
    DynamicMethodResult res = run_dynamic_method(data, index, method, run_cfg);
    any_failed = any_failed || res.n_failed > 0;
    csv << format_double(value) << ','
        << format_double(res.ate_result.trans.mean) << ','
        << format_double(res.ate_result.rot.mean) << ','
        << format_double(res.rte_result.trans.mean) << ','
        << format_double(res.rte_result.rot.mean) << ','
        << format_double(res.deg_motion_mean) << '\n';
    std::cerr << "[sweep] " << cfg.sweep_parameter << "=" << value
              << " ate_trans_mean=" << res.ate_result.trans.mean << "\n";
  }
  write_text(fs::path(cfg.output_dir) / "sweep.csv", csv.str());
  return any_failed ? 1 : 0;
}

/// Entry point shared by the CLI binary and in-process tests. args excludes
/// argv[0]. Returns the process exit code.
inline int cli_main(const std::vector<std::string>& args) {
  auto usage = []() {
    std::cerr << "usage: dmicp <static|dynamic|sweep> --config PATH "
                 "[--out DIR] [--seed N] [--methods a,b,c]\n";
  };
  if (args.empty()) {
    usage();
    return 2;
  }
  if (args[0] == "--help" || args[0] == "-h") {
    usage();
    return 0;
  }
  std::string subcommand = args[0];
  if (subcommand != "static" && subcommand != "dynamic" &&
      subcommand != "sweep") {
    std::cerr << "error: unknown subcommand '" << subcommand << "'\n";
    usage();
    return 2;
  }
  std::string config_path, out_dir, methods_arg;
  std::optional<std::uint64_t> seed_override;
  try {
    for (std::size_t i = 1; i < args.size(); ++i) {
      const std::string& a = args[i];
      auto next = [&]() -> const std::string& {
        if (i + 1 >= args.size()) {
          throw ConfigError("missing value for " + a);
        }
        return args[++i];
      };
      if (a == "--config") {
        config_path = next();
      } else if (a == "--out") {
        out_dir = next();
      } else if (a == "--seed") {
        seed_override = std::stoull(next());
      } else if (a == "--methods") {
        methods_arg = next();
      } else if (a == "--help" || a == "-h") {
        usage();
        return 0;
      } else {
        throw ConfigError("unknown flag " + a);
      }
    }
    if (config_path.empty()) throw ConfigError("--config is required");

    ExperimentConfig cfg = load_config(config_path);
    cfg.experiment = subcommand;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed_override) cfg.seed = *seed_override;
    if (!methods_arg.empty()) {
      cfg.methods.clear();
      std::istringstream ms(methods_arg);
      std::string tok;
      while (std::getline(ms, tok, ',')) {
        if (!tok.empty()) cfg.methods.push_back(method_from_string(tok));
      }
    }
    validate_config(cfg);
    if (cfg.experiment == "static") return run_static(cfg);
    if (cfg.experiment == "dynamic") return run_dynamic(cfg);
    return run_sweep(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: bad numeric argument: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace dmicp
