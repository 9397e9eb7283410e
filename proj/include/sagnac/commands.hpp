// commands.hpp
// Subcommand implementations behind the CLI: each builds the source
// from a RunConfig, runs the simulation/analysis, writes CSV and
// report files, and returns the structured results for callers.

#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "sagnac/analysis.hpp"
#include "sagnac/config.hpp"
#include "sagnac/csv.hpp"
#include "sagnac/detection.hpp"
#include "sagnac/source.hpp"

namespace sagnac {

/// Pump preparation + state synthesis + dephasing channel per config.
/// In divergence mode the collected pair rate is also rescaled by the
/// aperture flux model.
inline SourceOutput build_source(const RunConfig& cfg) {
  cfg.validate();
  double hwp1 = cfg.hwp1_angle;
  double qwp1 = cfg.qwp1_angle;
  if (cfg.auto_balance) {
    const BalanceSolution sol = balance_solve(cfg.source, cfg.target_phi);
    hwp1 = sol.hwp1_angle;
    qwp1 = sol.qwp1_angle;
  }
  const PumpField pump = prepare_pump(cfg.pump_power_mw, hwp1, qwp1);
  SourceOutput out = sagnac_state(pump, cfg.source);

  double sigma = 0.0;
  switch (cfg.dephasing_mode) {
    case DephasingMode::none:
      break;
    case DephasingMode::coherence:
      sigma = sigma_for_coherence(cfg.coherence_d);
      break;
    case DephasingMode::divergence:
      sigma = aperture_to_sigma(cfg.divergence_mrad, cfg.aperture_cal);
      out.pair_rate_per_mw *= cfg.flux_model.scale(cfg.divergence_mrad);
      break;
  }
  if (sigma > 0.0) {
    out.state = apply_dephasing(out.pure_state(), sigma);
  }
  return out;
}

namespace detail {

inline std::filesystem::path prepare_out_dir(const std::string& out_dir) {
  std::filesystem::path dir(out_dir.empty() ? "." : out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir.string());
  return dir;
}

inline std::ofstream open_report(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

inline void write_fringe_rows(CsvWriter& csv, const FringeScan& scan) {
  for (const CountRecord& rec : scan.points) {
    csv.row({format_double(rad_to_deg(rec.theta1)), std::to_string(rec.singles_1),
             std::to_string(rec.singles_2), std::to_string(rec.coincidences_raw),
             format_double(rec.accidental_estimate),
             format_double(subtract_accidentals(rec))});
  }
}

/// Extrema visibility of the corrected counts, with negative minima
/// clamped to zero so the estimator stays defined near dark fringes.
inline double extrema_visibility(const FringeScan& scan) {
  double cmax = 0.0;
  double cmin = std::numeric_limits<double>::infinity();
  for (const CountRecord& rec : scan.points) {
    const double c = std::max(0.0, subtract_accidentals(rec));
    cmax = std::max(cmax, c);
    cmin = std::min(cmin, c);
  }
  if (!(cmax + cmin > 0.0)) return 0.0;
  return visibility(cmax, cmin);
}

inline void write_fit_report(std::ostream& out, const FitResult& fit, double v_extrema) {
  out << "v=" << format_double(fit.visibility) << "\n";
  out << "sigma_v=" << format_double(fit.sigma_v) << "\n";
  out << "c0=" << format_double(fit.c0) << "\n";
  out << "sigma_c0=" << format_double(fit.sigma_c0) << "\n";
  out << "phase_deg=" << format_double(rad_to_deg(fit.phase_offset)) << "\n";
  out << "sigma_phase_deg=" << format_double(rad_to_deg(fit.sigma_phase)) << "\n";
  out << "chi2_per_dof=" << format_double(fit.chi2_per_dof) << "\n";
  out << "v_extrema=" << format_double(v_extrema) << "\n";
  out << "phase_unconstrained=" << (fit.phase_unconstrained ? "true" : "false") << "\n";
}

}  // namespace detail

struct FringeCommandResult {
  FringeScan scan;
  FitResult fit;
  double v_extrema = 0.0;
  std::string csv_path;
  std::string report_path;
};

/// Simulate one fringe scan at the given theta2, fit it, and write the
/// per-angle CSV plus a key=value fit report.
inline FringeCommandResult cmd_fringe(const RunConfig& cfg, double theta2,
                                      const std::string& out_dir,
                                      std::ostream& log = std::cout) {
  const SourceOutput source = build_source(cfg);
  const auto dir = detail::prepare_out_dir(out_dir);

  FringeCommandResult result;
  result.scan = run_fringe(source, theta2, cfg.theta1_grid(), cfg.detection);
  result.fit = fit_fringe(result.scan);
  result.v_extrema = detail::extrema_visibility(result.scan);

  const auto csv_path = dir / cfg.fringe_csv;
  CsvWriter csv(csv_path.string(), "fringe/v1",
                {"theta1_deg", "singles1", "singles2", "raw_coinc", "accidentals",
                 "corrected"});
  detail::write_fringe_rows(csv, result.scan);
  csv.close();
  result.csv_path = csv_path.string();

  const auto report_path = dir / cfg.fringe_report;
  auto report = detail::open_report(report_path);
  report << "theta2_deg=" << format_double(rad_to_deg(theta2)) << "\n";
  detail::write_fit_report(report, result.fit, result.v_extrema);
  result.report_path = report_path.string();

  log << "fringe theta2=" << rad_to_deg(theta2) << " deg: V=" << result.fit.visibility
      << " +/- " << result.fit.sigma_v << " (extrema " << result.v_extrema << "), c0="
      << result.fit.c0 << ", chi2/dof=" << result.fit.chi2_per_dof << "\n";
  return result;
}

struct ChshCommandResult {
  std::array<ChshMeasurement, 4> measurements;
  ChshResult chsh;         ///< accidental variance included in sigmas
  ChshResult chsh_raw_var; ///< raw-count variances only
  double significance = 0.0;  ///< (S - 2) / sigma_S
  std::string csv_path;
  std::string report_path;
};

/// Simulate the 16 CHSH acquisitions, write them as CSV, and report
/// the four E values, S, sigma_S, and the violation significance.
inline ChshCommandResult cmd_chsh(const RunConfig& cfg, const std::string& out_dir,
                                  std::ostream& log = std::cout) {
  const SourceOutput source = build_source(cfg);
  const auto dir = detail::prepare_out_dir(out_dir);

  ChshCommandResult result;
  result.measurements = run_chsh(source, cfg.detection, cfg.chsh_angles);

  std::array<std::pair<double, double>, 4> e_inc;
  std::array<std::pair<double, double>, 4> e_raw;
  for (int k = 0; k < 4; ++k) {
    e_inc[k] = chsh_e(result.measurements[k], true);
    e_raw[k] = chsh_e(result.measurements[k], false);
  }
  result.chsh = chsh_s(e_inc);
  result.chsh_raw_var = chsh_s(e_raw);
  result.significance = (result.chsh.s - 2.0) / result.chsh.sigma_s;

  const auto csv_path = dir / cfg.chsh_csv;
  CsvWriter csv(csv_path.string(), "chsh/v1",
                {"pair", "outcome", "theta1_deg", "theta2_deg", "singles1", "singles2",
                 "raw_coinc", "accidentals", "corrected"});
  for (int k = 0; k < 4; ++k) {
    const ChshMeasurement& m = result.measurements[k];
    for (int combo = 0; combo < 4; ++combo) {
      const CountRecord& rec = m.records[combo];
      csv.row({std::to_string(k + 1), ChshMeasurement::labels()[combo],
               format_double(rad_to_deg(rec.theta1)), format_double(rad_to_deg(rec.theta2)),
               std::to_string(rec.singles_1), std::to_string(rec.singles_2),
               std::to_string(rec.coincidences_raw), format_double(rec.accidental_estimate),
               format_double(subtract_accidentals(rec))});
    }
  }
  csv.close();
  result.csv_path = csv_path.string();

  const auto report_path = dir / cfg.chsh_report;
  auto report = detail::open_report(report_path);
  for (int k = 0; k < 4; ++k) {
    report << "e" << (k + 1) << "=" << format_double(result.chsh.e_values[k]) << "\n";
    report << "sigma_e" << (k + 1) << "=" << format_double(result.chsh.e_sigmas[k]) << "\n";
  }
  report << "s=" << format_double(result.chsh.s) << "\n";
  report << "sigma_s=" << format_double(result.chsh.sigma_s) << "\n";
  report << "sigma_s_raw_var_only=" << format_double(result.chsh_raw_var.sigma_s) << "\n";
  report << "significance=" << format_double(result.significance) << "\n";
  result.report_path = report_path.string();

  log << "chsh: S=" << result.chsh.s << " +/- " << result.chsh.sigma_s
      << " (violation significance " << result.significance << " sigma)\n";
  return result;
}

struct SweepPoint {
  double divergence_mrad = 0.0;
  double sigma_phi = 0.0;
  double coherence_d = 0.0;
  double fitted_v = 0.0;
  double sigma_v = 0.0;
  double flux_pairs_per_s_per_mw = 0.0;
};

struct SweepCommandResult {
  std::vector<SweepPoint> points;
  std::string csv_path;
};

/// Fringe simulation and fit at theta2 = 45 deg for each divergence
/// angle, with the model flux normalization per point.
inline SweepCommandResult cmd_sweep_aperture(const RunConfig& cfg,
                                             const std::vector<double>& divergences_mrad,
                                             const std::string& out_dir,
                                             std::ostream& log = std::cout) {
  cfg.validate();
  if (divergences_mrad.empty()) {
    throw std::invalid_argument("sweep-aperture: divergence list is empty");
  }
  for (std::size_t i = 0; i < divergences_mrad.size(); ++i) {
    if (!(divergences_mrad[i] >= 0.0)) {
      throw std::invalid_argument("sweep-aperture: divergences must be >= 0");
    }
    if (i > 0 && !(divergences_mrad[i] > divergences_mrad[i - 1])) {
      throw std::invalid_argument("sweep-aperture: divergences must be strictly increasing");
    }
  }
  const auto dir = detail::prepare_out_dir(out_dir);

  SweepCommandResult result;
  const auto csv_path = dir / cfg.sweep_csv;
  CsvWriter csv(csv_path.string(), "sweep/v1",
                {"divergence_mrad", "sigma_phi_rad", "coherence_d", "fitted_v", "sigma_v",
                 "flux_pairs_per_s_per_mw"});
  for (std::size_t i = 0; i < divergences_mrad.size(); ++i) {
    RunConfig point_cfg = cfg;
    point_cfg.dephasing_mode = DephasingMode::divergence;
    point_cfg.divergence_mrad = divergences_mrad[i];
    const SourceOutput source = build_source(point_cfg);

    SweepPoint point;
    point.divergence_mrad = divergences_mrad[i];
    point.sigma_phi = aperture_to_sigma(divergences_mrad[i], cfg.aperture_cal);
    point.coherence_d = coherence_factor(point.sigma_phi);
    point.flux_pairs_per_s_per_mw =
        cfg.source.pair_rate_per_mw * cfg.flux_model.scale(divergences_mrad[i]);

    const FringeScan scan =
        run_fringe(source, pi / 4.0, cfg.theta1_grid(), cfg.detection, /*scan_id=*/i);
    const FitResult fit = fit_fringe(scan);
    point.fitted_v = fit.visibility;
    point.sigma_v = fit.sigma_v;

    csv.row({format_double(point.divergence_mrad), format_double(point.sigma_phi),
             format_double(point.coherence_d), format_double(point.fitted_v),
             format_double(point.sigma_v), format_double(point.flux_pairs_per_s_per_mw)});
    result.points.push_back(point);
    log << "sweep " << point.divergence_mrad << " mrad: V=" << point.fitted_v
        << ", flux=" << point.flux_pairs_per_s_per_mw << " pairs/s/mW\n";
  }
  csv.close();
  result.csv_path = csv_path.string();
  return result;
}

struct BalanceCommandResult {
  BalanceSolution solution;
  double phi_p = 0.0;
  double usable_pump_mw = 0.0;
  double usable_fraction = 0.0;
  std::string report_path;
};

/// Solve the pump-preparation angles for beta = 1 at the configured
/// target phase and verify by round-tripping through the source model.
inline BalanceCommandResult cmd_balance(const RunConfig& cfg, const std::string& out_dir,
                                        std::ostream& log = std::cout) {
  cfg.validate();
  const auto dir = detail::prepare_out_dir(out_dir);

  BalanceCommandResult result;
  result.solution = balance_solve(cfg.source, cfg.target_phi);
  const PumpField pump =
      prepare_pump(cfg.pump_power_mw, result.solution.hwp1_angle, result.solution.qwp1_angle);
  const SourceOutput out = sagnac_state(pump, cfg.source);
  result.phi_p = pump.phi_p();
  result.usable_pump_mw = out.usable_pump_mw;
  result.usable_fraction = out.usable_fraction();

  const auto report_path = dir / cfg.balance_report;
  auto report = detail::open_report(report_path);
  report << "hwp1_deg=" << format_double(rad_to_deg(result.solution.hwp1_angle)) << "\n";
  report << "qwp1_deg=" << format_double(rad_to_deg(result.solution.qwp1_angle)) << "\n";
  report << "beta=" << format_double(out.beta) << "\n";
  report << "phi_deg=" << format_double(rad_to_deg(out.phi)) << "\n";
  report << "phi_p_deg=" << format_double(rad_to_deg(result.phi_p)) << "\n";
  report << "usable_pump_mw=" << format_double(result.usable_pump_mw) << "\n";
  report << "usable_fraction=" << format_double(result.usable_fraction) << "\n";
  result.report_path = report_path.string();

  log << "balance: HWP1=" << rad_to_deg(result.solution.hwp1_angle)
      << " deg, QWP1=" << rad_to_deg(result.solution.qwp1_angle)
      << " deg -> beta=" << out.beta << ", phi=" << rad_to_deg(out.phi)
      << " deg, usable pump " << result.usable_fraction * 100.0 << "%\n";
  return result;
}

struct FitCommandResult {
  FitResult fit;
  double v_extrema = 0.0;
  std::string report_path;
};

/// Fit an externally supplied fringe CSV (schema fringe/v1). Corrected
/// counts are recomputed from the raw and accidental columns.
inline FitCommandResult cmd_fit(const std::string& csv_path, const std::string& out_dir,
                                const RunConfig& cfg, std::ostream& log = std::cout) {
  const CsvTable table = read_csv(csv_path, "fringe/v1");
  const std::vector<std::string> expected = {"theta1_deg", "singles1", "singles2",
                                             "raw_coinc", "accidentals", "corrected"};
  if (table.columns != expected) {
    throw SchemaError(csv_path + " line 2: unexpected fringe/v1 columns");
  }

  FringeScan scan;
  scan.theta2 = 0.0;  // not recorded in the schema; irrelevant to the fit
  double prev_theta1 = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int lineno = table.row_numbers[r];
    auto bad = [&](const std::string& why) {
      return SchemaError(csv_path + " line " + std::to_string(lineno) + ": " + why);
    };
    CountRecord rec;
    rec.theta1 = deg_to_rad(row[0]);
    if (!(rec.theta1 > prev_theta1)) throw bad("theta1_deg must be strictly increasing");
    prev_theta1 = rec.theta1;
    if (row[1] < 0 || row[2] < 0 || row[3] < 0) throw bad("counts must be >= 0");
    rec.singles_1 = static_cast<std::int64_t>(std::llround(row[1]));
    rec.singles_2 = static_cast<std::int64_t>(std::llround(row[2]));
    rec.coincidences_raw = static_cast<std::int64_t>(std::llround(row[3]));
    if (row[4] < 0) throw bad("accidentals must be >= 0");
    rec.accidental_estimate = row[4];
    rec.duration = 1.0;  // fit-irrelevant placeholder
    scan.points.push_back(rec);
  }
  if (scan.points.size() < 8) {
    throw SchemaError(csv_path + ": fewer than 8 data rows");
  }

  FitCommandResult result;
  result.fit = fit_fringe(scan);
  result.v_extrema = detail::extrema_visibility(scan);

  const auto dir = detail::prepare_out_dir(out_dir);
  const auto report_path = dir / cfg.fringe_report;
  auto report = detail::open_report(report_path);
  report << "input=" << csv_path << "\n";
  detail::write_fit_report(report, result.fit, result.v_extrema);
  result.report_path = report_path.string();

  log << "fit " << csv_path << ": V=" << result.fit.visibility << " +/- "
      << result.fit.sigma_v << ", c0=" << result.fit.c0
      << (result.fit.phase_unconstrained ? " (phase unconstrained)" : "") << "\n";
  return result;
}

}  // namespace sagnac
