// sagnac-sim: command-line front end for the Sagnac SPDC source
// simulator. Subcommands: fringe, chsh, sweep-aperture, balance, fit.
// Exit codes: 0 success, 1 validation error, 2 solver/fit failure,
// 3 I/O error.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sagnac/commands.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

sagnac::RunConfig load_run_config(const GlobalOptions& opts) {
  sagnac::RunConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = sagnac::load_config(opts.config_path);
  } else {
    cfg.validate();
  }
  if (opts.seed) cfg.detection.rng_seed = *opts.seed;
  return cfg;
}

int dispatch(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const sagnac::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const sagnac::ConvergenceError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 2;
  } catch (const sagnac::SchemaError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polarization-Sagnac SPDC entanglement source simulator"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "Configuration file (key=value sections)");
  app.add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the RNG master seed");

  auto* fringe = app.add_subcommand("fringe", "Simulate and fit one coincidence fringe scan");
  double theta2_deg = 0.0;
  auto* theta2_opt =
      fringe->add_option("--theta2", theta2_deg, "Idler analyzer angle in degrees");

  auto* chsh = app.add_subcommand("chsh", "Simulate the 16 CHSH coincidence measurements");

  auto* sweep = app.add_subcommand("sweep-aperture",
                                "Visibility and flux vs collection divergence angle");
  std::vector<double> divergences = {2.0, 5.0, 8.0, 12.5, 20.0, 30.0};
  sweep->add_option("--divergences", divergences,
                    "Comma-separated divergence angles in mrad")
      ->delimiter(',');

  auto* balance = app.add_subcommand("balance", "Solve pump HWP1/QWP1 angles for beta = 1");

  auto* fit = app.add_subcommand("fit", "Fit an existing fringe CSV (schema fringe/v1)");
  std::string fit_csv;
  fit->add_option("csv", fit_csv, "Path to the fringe CSV")->required();

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) opts.seed = seed_value;

  return dispatch([&] {
    const sagnac::RunConfig cfg = load_run_config(opts);
    if (app.got_subcommand(fringe)) {
      const double theta2 = (*theta2_opt) ? sagnac::deg_to_rad(theta2_deg) : cfg.theta2;
      sagnac::cmd_fringe(cfg, theta2, opts.out_dir);
    } else if (app.got_subcommand(chsh)) {
      sagnac::cmd_chsh(cfg, opts.out_dir);
    } else if (app.got_subcommand(sweep)) {
      sagnac::cmd_sweep_aperture(cfg, divergences, opts.out_dir);
    } else if (app.got_subcommand(balance)) {
      sagnac::cmd_balance(cfg, opts.out_dir);
    } else if (app.got_subcommand(fit)) {
      sagnac::cmd_fit(fit_csv, opts.out_dir, cfg);
    }
  });
}
