// CLI-layer tests: config parsing and validation, command round-trips,
// CSV schemas, determinism, and exit codes of the installed binary.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sagnac/commands.hpp"

using namespace sagnac;
namespace fs = std::filesystem;

namespace {

RunConfig config_from(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "<test>");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path test_dir(const std::string& name) {
  const fs::path dir = fs::path("cli_test_out") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::ostringstream devnull;

#ifdef SAGNAC_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(SAGNAC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}
#endif

}  // namespace

TEST_CASE("defaults load and validate") {
  const RunConfig cfg = config_from("");
  CHECK(cfg.pump_power_mw == doctest::Approx(3.28));
  CHECK(cfg.detection.integration_time == doctest::Approx(40.0));
  CHECK(cfg.detection.coincidence_window == doctest::Approx(1e-9));
  CHECK(cfg.source.pair_rate_per_mw == doctest::Approx(5000.0));
  CHECK(cfg.source.pbs_pump.t_h == doctest::Approx(0.73));
  CHECK(cfg.source.pbs_pump.leak_h == doctest::Approx(0.03));
  CHECK(cfg.source.pbs_pump.r_v == doctest::Approx(0.80));
  CHECK(cfg.source.pbs_pump.leak_v == doctest::Approx(0.05));
  CHECK(cfg.coherence_d == doctest::Approx(0.9685));
  CHECK(cfg.auto_balance);
  CHECK(cfg.target_phi == doctest::Approx(pi));
  const auto ref = default_chsh_angles();
  for (int k = 0; k < 4; ++k) {
    CHECK(cfg.chsh_angles[k][0] == doctest::Approx(ref[k][0]));
    CHECK(cfg.chsh_angles[k][1] == doctest::Approx(ref[k][1]));
  }
}

TEST_CASE("config parsing covers sections, comments and angle conversion") {
  const RunConfig cfg = config_from(
      "# comment\n"
      "[pump]\n"
      "power_mw = 2.0   # inline comment\n"
      "auto_balance = false\n"
      "hwp1_deg = 22.5\n"
      "[scan]\n"
      "theta2_deg = 46\n"
      "[detection]\n"
      "seed = 99\n");
  CHECK(cfg.pump_power_mw == doctest::Approx(2.0));
  CHECK(!cfg.auto_balance);
  CHECK(cfg.hwp1_angle == doctest::Approx(pi / 8.0));
  CHECK(cfg.theta2 == doctest::Approx(deg_to_rad(46.0)));
  CHECK(cfg.detection.rng_seed == 99);
  CHECK(cfg.detection.pump_power_mw == doctest::Approx(2.0));
}

TEST_CASE("unknown keys are rejected by name") {
  CHECK_THROWS_WITH_AS(config_from("[source]\nbogus_key = 1\n"),
                       doctest::Contains("source.bogus_key"), std::invalid_argument);
}

TEST_CASE("constraint violations name the offending key") {
  CHECK_THROWS_WITH_AS(config_from("[source]\npbs_t_h = 1.2\n"),
                       doctest::Contains("t_h"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(config_from("[scan]\ntheta1_points = 4\n"),
                       doctest::Contains("theta1_points"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(config_from("[source]\neta_v = 0\n"), doctest::Contains("eta_v"),
                       std::invalid_argument);
  CHECK_THROWS_AS(config_from("[dephasing]\nmode = sideways\n"), std::invalid_argument);
  CHECK_THROWS_AS(config_from("[pump]\npower_mw = banana\n"), std::invalid_argument);
}

TEST_CASE("fringe command writes CSV and report; HV-basis visibility ~0.99") {
  const RunConfig cfg = config_from("");
  const auto dir = test_dir("fringe_hv");
  const FringeCommandResult res = cmd_fringe(cfg, 0.0, dir.string(), devnull);
  CHECK(res.fit.visibility > 0.99);
  CHECK(fs::exists(res.csv_path));
  CHECK(fs::exists(res.report_path));
  const std::string csv = slurp(res.csv_path);
  CHECK(csv.rfind("# schema=fringe/v1", 0) == 0);
  const std::string report = slurp(res.report_path);
  CHECK(report.find("v=") != std::string::npos);
  CHECK(report.find("chi2_per_dof=") != std::string::npos);
}

TEST_CASE("fringe at 46 degrees reproduces the calibrated visibility") {
  const RunConfig cfg = config_from("");
  const auto dir = test_dir("fringe_46");
  const FringeCommandResult res =
      cmd_fringe(cfg, deg_to_rad(46.0), dir.string(), devnull);
  CHECK(std::abs(res.fit.visibility - 0.9685) <= 0.01);
}

TEST_CASE("fixed seed makes byte-identical output") {
  const RunConfig cfg = config_from("[detection]\nseed = 2024\n");
  const auto dir1 = test_dir("det_a");
  const auto dir2 = test_dir("det_b");
  cmd_fringe(cfg, deg_to_rad(46.0), dir1.string(), devnull);
  cmd_fringe(cfg, deg_to_rad(46.0), dir2.string(), devnull);
  CHECK(slurp((dir1 / "fringe.csv").string()) == slurp((dir2 / "fringe.csv").string()));
  CHECK(slurp((dir1 / "fringe_fit.txt").string()) ==
        slurp((dir2 / "fringe_fit.txt").string()));
}

TEST_CASE("chsh command: ideal source approaches the Tsirelson bound") {
  const RunConfig cfg = config_from(
      "[dephasing]\nmode = none\n"
      "[detection]\nintegration_time_s = 160\nseed = 31\n");
  const auto dir = test_dir("chsh_ideal");
  const ChshCommandResult res = cmd_chsh(cfg, dir.string(), devnull);
  CHECK(std::abs(res.chsh.s - 2.0 * std::sqrt(2.0)) < 3.0 * res.chsh.sigma_s);
  CHECK(res.significance > 100.0);
  const std::string report = slurp(res.report_path);
  CHECK(report.find("significance=") != std::string::npos);
  CHECK(report.find("sigma_s_raw_var_only=") != std::string::npos);
  const std::string csv = slurp(res.csv_path);
  CHECK(csv.rfind("# schema=chsh/v1", 0) == 0);
  // 16 data rows: header + schema + 16 lines
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 18);
}

TEST_CASE("chsh command at the calibrated coherence reproduces S") {
  const RunConfig cfg = config_from(
      "[dephasing]\ncoherence_d = 0.9548\n"
      "[detection]\nseed = 7\n");
  const auto dir = test_dir("chsh_paper");
  const ChshCommandResult res = cmd_chsh(cfg, dir.string(), devnull);
  CHECK(std::abs(res.chsh.s - 2.7645) < 3.0 * res.chsh.sigma_s);
}

TEST_CASE("sweep-aperture hits its anchors with monotone columns") {
  const RunConfig cfg = config_from("[detection]\nseed = 5\n");
  const auto dir = test_dir("sweep");
  const SweepCommandResult res =
      cmd_sweep_aperture(cfg, {2.0, 5.0, 8.0, 12.5, 20.0, 30.0}, dir.string(), devnull);
  REQUIRE(res.points.size() == 6);
  for (std::size_t i = 1; i < res.points.size(); ++i) {
    CHECK(res.points[i].fitted_v < res.points[i - 1].fitted_v);
    CHECK(res.points[i].flux_pairs_per_s_per_mw > res.points[i - 1].flux_pairs_per_s_per_mw);
  }
  CHECK(std::abs(res.points[3].fitted_v - 0.9685) <= 0.01);
  CHECK(res.points[3].flux_pairs_per_s_per_mw == doctest::Approx(5000.0).epsilon(1e-9));
  CHECK(std::abs(res.points[5].fitted_v - 0.930) <= 0.01);
  CHECK(res.points[5].flux_pairs_per_s_per_mw == doctest::Approx(22750.0).epsilon(1e-9));
  CHECK_THROWS_AS(cmd_sweep_aperture(cfg, {5.0, 2.0}, dir.string(), devnull),
                  std::invalid_argument);
}

TEST_CASE("balance command solves and reports the pump angles") {
  const RunConfig cfg = config_from("");
  const auto dir = test_dir("balance");
  const BalanceCommandResult res = cmd_balance(cfg, dir.string(), devnull);
  CHECK(std::abs(res.solution.beta - 1.0) <= 1e-6);
  CHECK(std::abs(wrap_angle(res.solution.phi - pi)) <= 1e-6);
  CHECK(res.usable_fraction == doctest::Approx(2.0 * 0.73 * 0.8 / 1.53).epsilon(1e-6));
  const std::string report = slurp(res.report_path);
  CHECK(report.find("hwp1_deg=") != std::string::npos);
  CHECK(report.find("usable_fraction=") != std::string::npos);
}

TEST_CASE("fit command round-trips the fringe CSV") {
  const RunConfig cfg = config_from("");
  const auto dir = test_dir("roundtrip");
  const FringeCommandResult fringe =
      cmd_fringe(cfg, deg_to_rad(46.0), dir.string(), devnull);
  const FitCommandResult refit = cmd_fit(fringe.csv_path, dir.string(), cfg, devnull);
  CHECK(refit.fit.visibility == doctest::Approx(fringe.fit.visibility).epsilon(1e-6));
  CHECK(refit.fit.c0 == doctest::Approx(fringe.fit.c0).epsilon(1e-6));
  CHECK(refit.fit.phase_offset == doctest::Approx(fringe.fit.phase_offset).epsilon(1e-4));
}

TEST_CASE("fit command reports schema violations with row numbers") {
  const RunConfig cfg = config_from("");
  const auto dir = test_dir("fit_errors");

  {  // malformed cell on line 5
    std::ofstream out(dir / "bad.csv");
    out << "# schema=fringe/v1\n";
    out << "theta1_deg,singles1,singles2,raw_coinc,accidentals,corrected\n";
    out << "0,100,100,10,1,9\n";
    out << "10,100,100,10,1,9\n";
    out << "20,100,oops,10,1,9\n";
  }
  CHECK_THROWS_WITH_AS(cmd_fit((dir / "bad.csv").string(), dir.string(), cfg, devnull),
                       doctest::Contains("line 5"), SchemaError);

  {  // unsupported schema version
    std::ofstream out(dir / "badschema.csv");
    out << "# schema=fringe/v2\n";
    out << "theta1_deg,singles1,singles2,raw_coinc,accidentals,corrected\n";
  }
  CHECK_THROWS_AS(cmd_fit((dir / "badschema.csv").string(), dir.string(), cfg, devnull),
                  SchemaError);

  CHECK_THROWS_AS(cmd_fit((dir / "missing.csv").string(), dir.string(), cfg, devnull),
                  IoError);
}

TEST_CASE("fit command flags constant data as phase-unconstrained") {
  const RunConfig cfg = config_from("");
  const auto dir = test_dir("fit_flat");
  {
    std::ofstream out(dir / "flat.csv");
    out << "# schema=fringe/v1\n";
    out << "theta1_deg,singles1,singles2,raw_coinc,accidentals,corrected\n";
    for (int k = 0; k < 12; ++k) {
      out << 15 * k << ",100000,100000,4000,400,3600\n";
    }
  }
  const FitCommandResult res = cmd_fit((dir / "flat.csv").string(), dir.string(), cfg, devnull);
  CHECK(res.fit.visibility < 0.01);
  CHECK(res.fit.phase_unconstrained);
}

#ifdef SAGNAC_CLI_PATH

TEST_CASE("binary exit codes follow the contract") {
  const auto dir = test_dir("binary");
  // 0: success
  CHECK(run_cli("balance --out " + (dir / "ok").string()) == 0);
  // 1: validation error (infeasible source)
  {
    std::ofstream out(dir / "bad.cfg");
    out << "[source]\neta_v = 0\n";
  }
  CHECK(run_cli("balance --config " + (dir / "bad.cfg").string()) == 1);
  // 1: unknown config key
  {
    std::ofstream out(dir / "unknown.cfg");
    out << "[source]\nmystery = 1\n";
  }
  CHECK(run_cli("balance --config " + (dir / "unknown.cfg").string()) == 1);
  // 2: solver failure (PBS passes no H pump at all)
  {
    std::ofstream out(dir / "dark.cfg");
    out << "[source]\npbs_t_h = 0\npbs_leak_h = 0\n";
  }
  CHECK(run_cli("balance --config " + (dir / "dark.cfg").string()) == 2);
  // 3: I/O error (missing input file)
  CHECK(run_cli("fit " + (dir / "nope.csv").string()) == 3);
  // 1: malformed input data
  {
    std::ofstream out(dir / "rows.csv");
    out << "# schema=fringe/v1\n";
    out << "theta1_deg,singles1,singles2,raw_coinc,accidentals,corrected\n";
    out << "0,1,notanumber,1,0,1\n";
  }
  CHECK(run_cli("fit " + (dir / "rows.csv").string()) == 1);
}

TEST_CASE("binary runs fringe deterministically under --seed") {
  const auto dir = test_dir("binary_seed");
  const std::string out1 = (dir / "r1").string();
  const std::string out2 = (dir / "r2").string();
  CHECK(run_cli("fringe --theta2 46 --seed 11 --out " + out1) == 0);
  CHECK(run_cli("fringe --theta2 46 --seed 11 --out " + out2) == 0);
  CHECK(slurp(out1 + "/fringe.csv") == slurp(out2 + "/fringe.csv"));
  // CSV refit through the binary
  CHECK(run_cli("fit " + out1 + "/fringe.csv --out " + (dir / "refit").string()) == 0);
}

TEST_CASE("binary runs the remaining subcommands") {
  const auto dir = test_dir("binary_rest");
  CHECK(run_cli("sweep-aperture --divergences 5,12.5 --seed 3 --out " +
                (dir / "sweep").string()) == 0);
  CHECK(fs::exists(dir / "sweep" / "sweep.csv"));
  const std::string csv = slurp((dir / "sweep" / "sweep.csv").string());
  CHECK(csv.rfind("# schema=sweep/v1", 0) == 0);
  CHECK(run_cli("chsh --seed 4 --out " + (dir / "chsh").string()) == 0);
  CHECK(fs::exists(dir / "chsh" / "chsh_report.txt"));
}

#endif  // SAGNAC_CLI_PATH
