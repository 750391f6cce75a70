#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>

#include "support.hpp"

using namespace dmicp;

namespace {

const char* kCsvHeader =
    "iteration,wall_time_s,residual_cost,n_correspondences,"
    "rot_increment_norm,trans_increment_norm,rot_error,trans_error,"
    "n_constraints,degm_0,degm_1,degm_2,degm_3,degm_4,degm_5";

json small_static_config() {
  json j;
  j["seed"] = 123;
  j["methods"] = json::array({"P2Plane"});
  j["scenario"] = {{"type", "cylinder"},
                   {"radius", 1.0},
                   {"height", 4.0},
                   {"n_points", 400},
                   {"noise_sigma", 0.02},
                   {"cap_points", 40},
                   {"perturbation",
                    {{"rotation_vector", {0.015, 0.0, 0.0}},
                     {"translation", {0.25, 0.15, 0.0}}}}};
  j["icp"] = {{"max_iterations", 5}};
  return j;
}

// Frozen ordering scene: the pillar is beyond sensor range for the whole
// line, so every scan sees rough ground only and planar drift is free.
json ordering_dynamic_config() {
  json j;
  j["seed"] = 5;
  j["methods"] = json::array({"P2Plane", "EqCon"});
  j["scenario"] = {{"type", "pillar"},
                   {"n_map_points", 15000},
                   {"scan_point_count", 1200},
                   {"plane_noise_sigma", 0.03},
                   {"scan_noise_sigma", 0.15},
                   {"trajectory_line",
                    {{"start", {0.0, -4.0, 1.5}},
                     {"end", {0.0, 4.0, 1.5}},
                     {"n_poses", 5}}}};
  return j;
}

json sweep_config() {
  json j = ordering_dynamic_config();
  j["methods"] = json::array({"LReg"});
  j["sweep"] = {{"parameter", "lambda_lreg"},
                {"values", {1.0, 10.0, 100.0, 1e3, 1e4, 1e12}}};
  return j;
}

int count_files_with_suffix(const std::string& dir, const std::string& suffix) {
  int n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (name.size() >= suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      ++n;
    }
  }
  return n;
}

}  // namespace

TEST(CliArgs, NoArgumentsFails) {
  EXPECT_EQ(support::run_cli({}), 2);
}

TEST(CliArgs, HelpSucceeds) {
  EXPECT_EQ(support::run_cli({"--help"}), 0);
}

TEST(CliArgs, UnknownSubcommandFails) {
  EXPECT_EQ(support::run_cli({"frobnicate", "--config", "whatever.json"}), 2);
}

TEST(CliArgs, MissingConfigFlagFails) {
  EXPECT_EQ(support::run_cli({"static"}), 2);
}

TEST(CliArgs, MalformedJsonFails) {
  support::TempDir tmp;
  std::string cfg = tmp.file("bad.json");
  support::write_file(cfg, "{ this is not json");
  EXPECT_EQ(support::run_cli({"static", "--config", cfg}), 2);
}

TEST(CliArgs, UnknownMethodInOverrideFails) {
  support::TempDir tmp;
  std::string cfg = tmp.file("cfg.json");
  support::write_file(cfg, small_static_config().dump());
  EXPECT_EQ(support::run_cli({"static", "--config", cfg, "--out",
                              tmp.file("out"), "--methods", "Quaternions"}),
            2);
}

TEST(CliStatic, SingleMethodWritesContractFiles) {
  support::TempDir tmp;
  std::string cfg = tmp.file("cfg.json");
  support::write_file(cfg, small_static_config().dump());
  std::string out = tmp.file("out");
  ASSERT_EQ(support::run_cli({"static", "--config", cfg, "--out", out}), 0);

  std::string csv = support::read_file(out + "/P2Plane.csv");
  std::vector<std::string> lines = support::split_lines(csv);
  ASSERT_FALSE(lines.empty());
  EXPECT_EQ(lines[0], kCsvHeader);
  EXPECT_LE(lines.size(), 6u);  // header plus at most max_iterations rows
  EXPECT_EQ(count_files_with_suffix(out, ".csv"), 1);
  EXPECT_TRUE(std::filesystem::exists(out + "/P2Plane_aligned.ply"));
  EXPECT_TRUE(std::filesystem::exists(out + "/source.ply"));
  EXPECT_TRUE(std::filesystem::exists(out + "/reference.ply"));

  json summary = json::parse(support::read_file(out + "/summary.json"));
  ASSERT_TRUE(summary["methods"].contains("P2Plane"));
  EXPECT_EQ(summary["methods"]["P2Plane"]["iterations"].get<int>(),
            static_cast<int>(lines.size()) - 1);
  EXPECT_TRUE(summary["methods"]["P2Plane"].contains("trans_error"));
}

TEST(CliStatic, RunsAreByteIdenticalUpToWallTime) {
  support::TempDir tmp;
  json cfg_json = small_static_config();
  cfg_json["methods"] = json::array({"P2Plane", "Tsvd"});
  std::string cfg = tmp.file("cfg.json");
  support::write_file(cfg, cfg_json.dump());
  std::string out_a = tmp.file("a"), out_b = tmp.file("b");
  ASSERT_EQ(support::run_cli({"static", "--config", cfg, "--out", out_a}), 0);
  ASSERT_EQ(support::run_cli({"static", "--config", cfg, "--out", out_b}), 0);
  for (const char* name : {"P2Plane.csv", "Tsvd.csv"}) {
    std::string a = support::strip_wall_column(
        support::read_file(out_a + "/" + name));
    std::string b = support::strip_wall_column(
        support::read_file(out_b + "/" + name));
    EXPECT_EQ(a, b) << name;
    EXPECT_FALSE(a.empty()) << name;
  }
  for (const char* name :
       {"summary.json", "source.ply", "reference.ply", "P2Plane_aligned.ply",
        "Tsvd_aligned.ply"}) {
    EXPECT_EQ(support::read_file(out_a + "/" + name),
              support::read_file(out_b + "/" + name))
        << name;
  }
}

TEST(CliStatic, InputHashIsSharedAcrossMethods) {
  support::TempDir tmp;
  json cfg_json = small_static_config();
  cfg_json["methods"] = json::array({"P2Plane", "EqCon", "PriorOnly"});
  std::string cfg = tmp.file("cfg.json");
  support::write_file(cfg, cfg_json.dump());
  std::string out = tmp.file("out");
  ASSERT_EQ(support::run_cli({"static", "--config", cfg, "--out", out}), 0);
  json summary = json::parse(support::read_file(out + "/summary.json"));
  auto hash_of = [&](const char* m) {
    return summary["methods"][m]["input_hash"].get<std::uint64_t>();
  };
  EXPECT_EQ(hash_of("P2Plane"), hash_of("EqCon"));
  EXPECT_EQ(hash_of("P2Plane"), hash_of("PriorOnly"));
  EXPECT_NE(hash_of("P2Plane"), 0u);
}

TEST(CliDynamic, ZeroNoiseActiveMethodTracksGroundTruth) {
  support::TempDir tmp;
  json j;
  j["seed"] = 9;
  j["methods"] = json::array({"EqCon"});
  j["scenario"] = {{"type", "pillar"},
                   {"n_map_points", 8000},
                   {"scan_point_count", 800},
                   {"trajectory_line",
                    {{"start", {0.0, -4.0, 1.5}},
                     {"end", {0.0, 4.0, 1.5}},
                     {"n_poses", 3}}}};
  j["noise"] = {{"sigma_t", 0.0}, {"sigma_r", 0.0}};
  std::string cfg = tmp.file("cfg.json");
  support::write_file(cfg, j.dump());
  std::string out = tmp.file("out");
  ASSERT_EQ(support::run_cli({"dynamic", "--config", cfg, "--out", out}), 0);
  json summary = json::parse(support::read_file(out + "/summary.json"));
  double ate_mean =
      summary["methods"]["EqCon"]["ate"]["trans"]["mean"].get<double>();
  EXPECT_LE(ate_mean, 1e-3);
  EXPECT_TRUE(std::filesystem::exists(out + "/EqCon_trajectory.json"));
  EXPECT_TRUE(std::filesystem::exists(out + "/EqCon_stats.json"));
  EXPECT_TRUE(std::filesystem::exists(out + "/EqCon_map.ply"));
  EXPECT_TRUE(std::filesystem::exists(out + "/EqCon_map_error.csv"));
  Trajectory est = trajectory_from_json(
      json::parse(support::read_file(out + "/EqCon_trajectory.json")));
  EXPECT_EQ(est.size(), 3u);
}

TEST(CliDynamic, BaselineTrailsEqConUnderDefaultNoise) {
  support::TempDir tmp;
  std::string cfg = tmp.file("cfg.json");
  support::write_file(cfg, ordering_dynamic_config().dump());
  std::string out = tmp.file("out");
  ASSERT_EQ(support::run_cli({"dynamic", "--config", cfg, "--out", out}), 0);
  json summary = json::parse(support::read_file(out + "/summary.json"));
  double p2 =
      summary["methods"]["P2Plane"]["ate"]["trans"]["mean"].get<double>();
  double eq = summary["methods"]["EqCon"]["ate"]["trans"]["mean"].get<double>();
  EXPECT_GT(p2, eq);
  EXPECT_EQ(summary["methods"]["P2Plane"]["input_hash"].get<std::uint64_t>(),
            summary["methods"]["EqCon"]["input_hash"].get<std::uint64_t>());
}

TEST(CliSweep, RegularizationLadderIsMonotone) {
  support::TempDir tmp;
  std::string cfg = tmp.file("cfg.json");
  support::write_file(cfg, sweep_config().dump());
  std::string out = tmp.file("out");
  ASSERT_EQ(support::run_cli({"sweep", "--config", cfg, "--out", out}), 0);
  std::vector<std::string> lines =
      support::split_lines(support::read_file(out + "/sweep.csv"));
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[0],
            "value,ate_trans_mean,ate_rot_mean,rte_trans_mean,rte_rot_mean,"
            "deg_motion_mean");
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::istringstream row(lines[i]);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) cells.push_back(std::stod(cell));
    ASSERT_EQ(cells.size(), 6u);
    EXPECT_LE(cells[5], prev + 1e-15) << "row " << i;
    prev = cells[5];
  }
}

TEST(CliSweep, InvalidSweepConfigsFail) {
  support::TempDir tmp;
  json no_param = sweep_config();
  no_param["methods"] = json::array({"PriorOnly"});
  no_param["sweep"]["parameter"] = "epsilon";
  std::string cfg1 = tmp.file("c1.json");
  support::write_file(cfg1, no_param.dump());
  EXPECT_EQ(support::run_cli({"sweep", "--config", cfg1, "--out",
                              tmp.file("o1")}),
            2);

  json empty_values = sweep_config();
  empty_values["sweep"]["values"] = json::array();
  std::string cfg2 = tmp.file("c2.json");
  support::write_file(cfg2, empty_values.dump());
  EXPECT_EQ(support::run_cli({"sweep", "--config", cfg2, "--out",
                              tmp.file("o2")}),
            2);
}

TEST(CliGolden, TinyStaticRunMatchesCheckedInTraces) {
  std::string data_dir = DMICP_TEST_DATA_DIR;
  std::string cfg = data_dir + "/golden_static_config.json";
  ASSERT_TRUE(std::filesystem::exists(cfg))
      << "golden config missing: " << cfg;
  support::TempDir tmp;
  std::string out = tmp.file("out");
  ASSERT_EQ(support::run_cli({"static", "--config", cfg, "--out", out}), 0);
  for (const char* m : {"P2Plane", "EqCon"}) {
    std::string got = support::strip_wall_column(
        support::read_file(out + "/" + m + ".csv"));
    std::string want =
        support::read_file(data_dir + "/golden_" + m + ".csv");
    ASSERT_FALSE(want.empty()) << m;
    EXPECT_EQ(got, want) << m;
  }
}

TEST(CsvSchema, RecordsSerializeWithStableHeaderAndEmptyOptionalCells) {
  IterationRecord rec;
  rec.iteration = 1;
  rec.wall_time_s = 0.25;
  rec.residual_cost = 1.5;
  rec.n_correspondences = 42;
  rec.rot_increment_norm = 0.125;
  rec.trans_increment_norm = 0.0625;
  rec.n_constraints = 2;
  rec.degenerate_motion = {0.1, 0.2, 0, 0, 0, 0};
  std::string csv = records_to_csv({rec});
  std::vector<std::string> lines = support::split_lines(csv);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], kCsvHeader);
  EXPECT_EQ(lines[1],
            "1,0.25,1.5,42,0.125,0.0625,,,2,"
            "0.10000000000000001,0.20000000000000001,0,0,0,0");
  rec.rot_error = 0.5;
  rec.trans_error = 0.75;
  std::string with_errors = records_to_csv({rec});
  EXPECT_NE(with_errors.find(",0.5,0.75,"), std::string::npos);
}

TEST(CsvSchema, DoubleFormattingRoundTripsExactly) {
  for (double v : {0.1, 1.0 / 3.0, 1e300, 1e-300, -0.0, 12345.6789,
                   2.2250738585072014e-308}) {
    std::string s = format_double(v);
    double back = std::strtod(s.c_str(), nullptr);
    EXPECT_EQ(std::memcmp(&back, &v, sizeof(double)), 0) << s;
  }
}
