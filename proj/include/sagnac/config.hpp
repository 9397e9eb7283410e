// config.hpp
// Flat key=value run configuration with [section] headers. Angles and
// phases are written in degrees at this boundary and converted to
// radians on load; everything internal stays in radians.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sagnac/csv.hpp"
#include "sagnac/detection.hpp"
#include "sagnac/source.hpp"

namespace sagnac {

inline double deg_to_rad(double deg) { return deg * pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / pi; }

enum class DephasingMode { none, coherence, divergence };

struct RunConfig {
  SourceParams source{};

  // [pump]
  double pump_power_mw = 3.28;
  bool auto_balance = true;
  double target_phi = pi;  ///< radians; used when auto_balance
  double hwp1_angle = 0.0;  ///< radians; used when !auto_balance
  double qwp1_angle = 0.0;

  DetectionConfig detection{};

  // [dephasing]
  DephasingMode dephasing_mode = DephasingMode::coherence;
  double coherence_d = 0.9685;
  double divergence_mrad = 12.5;
  ApertureCalibration aperture_cal = default_aperture_calibration();

  // [flux]
  FluxApertureModel flux_model{};

  // [scan]
  double theta1_start = 0.0;  ///< radians
  double theta1_stop = 2.0 * pi;
  int theta1_points = 19;
  double theta2 = 0.0;

  ChshAngleSet chsh_angles = default_chsh_angles();

  // [output]
  std::string fringe_csv = "fringe.csv";
  std::string fringe_report = "fringe_fit.txt";
  std::string chsh_csv = "chsh.csv";
  std::string chsh_report = "chsh_report.txt";
  std::string sweep_csv = "sweep.csv";
  std::string balance_report = "balance.txt";

  std::vector<double> theta1_grid() const {
    std::vector<double> grid;
    grid.reserve(theta1_points);
    for (int i = 0; i < theta1_points; ++i) {
      grid.push_back(theta1_start +
                     (theta1_stop - theta1_start) * i / (theta1_points - 1));
    }
    return grid;
  }

  void validate() const {
    source.validate();
    detection.validate();
    aperture_cal.validate();
    auto check = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("RunConfig: ") + what);
    };
    check(std::isfinite(pump_power_mw) && pump_power_mw > 0.0,
          "pump.power_mw must be > 0");
    check(std::isfinite(target_phi), "pump.target_phi_deg must be finite");
    check(std::isfinite(hwp1_angle) && std::isfinite(qwp1_angle),
          "pump.hwp1_deg/qwp1_deg must be finite");
    check(coherence_d > 0.0 && coherence_d <= 1.0,
          "dephasing.coherence_d must be in (0,1]");
    check(divergence_mrad >= 0.0, "dephasing.divergence_mrad must be >= 0");
    check(flux_model.reference_divergence_mrad > 0.0,
          "flux.reference_divergence_mrad must be > 0");
    check(std::isfinite(flux_model.exponent) && flux_model.exponent > 0.0,
          "flux.aperture_exponent must be > 0");
    check(theta1_points >= 8, "scan.theta1_points must be >= 8");
    check(theta1_stop > theta1_start, "scan.theta1_stop_deg must exceed theta1_start_deg");
    for (const auto& pair : chsh_angles) {
      check(std::isfinite(pair[0]) && std::isfinite(pair[1]),
            "chsh.angles_deg must be finite");
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct ConfigParser {
  std::map<std::string, std::string> values;  // "section.key" -> raw value
  std::map<std::string, bool> consumed;

  void load(std::istream& in, const std::string& origin) {
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          throw std::invalid_argument(origin + " line " + std::to_string(lineno) +
                                      ": malformed section header");
        }
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument(origin + " line " + std::to_string(lineno) +
                                    ": expected key = value");
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) {
        throw std::invalid_argument(origin + " line " + std::to_string(lineno) +
                                    ": empty key");
      }
      const std::string full = section.empty() ? key : section + "." + key;
      values[full] = value;
      consumed[full] = false;
    }
  }

  bool has(const std::string& key) const { return values.count(key) > 0; }

  std::string raw(const std::string& key) {
    consumed[key] = true;
    return values.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const std::string v = raw(key);
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing junk");
      return x;
    } catch (const std::exception&) {
      throw std::invalid_argument("config key '" + key + "': invalid number '" + v + "'");
    }
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const std::string v = raw(key);
    try {
      std::size_t used = 0;
      const std::uint64_t x = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing junk");
      return x;
    } catch (const std::exception&) {
      throw std::invalid_argument("config key '" + key + "': invalid integer '" + v + "'");
    }
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string v = raw(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config key '" + key + "': invalid boolean '" + v + "'");
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    return raw(key);
  }

  std::vector<double> number_list(const std::string& key) {
    std::vector<double> out;
    if (!has(key)) return out;
    std::stringstream ss(raw(key));
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell = trim(cell);
      try {
        std::size_t used = 0;
        out.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument("trailing junk");
      } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': invalid number '" + cell + "'");
      }
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, used] : consumed) {
      if (!used) throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
};

}  // namespace detail

/// Parse a configuration stream into a validated RunConfig. Unknown
/// keys are rejected.
inline RunConfig parse_config(std::istream& in, const std::string& origin = "<config>") {
  detail::ConfigParser p;
  p.load(in, origin);

  RunConfig cfg;
  cfg.source.eta_h = p.number("source.eta_h", cfg.source.eta_h);
  cfg.source.eta_v = p.number("source.eta_v", cfg.source.eta_v);
  cfg.source.pbs_pump.t_h = p.number("source.pbs_t_h", cfg.source.pbs_pump.t_h);
  cfg.source.pbs_pump.leak_h = p.number("source.pbs_leak_h", cfg.source.pbs_pump.leak_h);
  cfg.source.pbs_pump.r_v = p.number("source.pbs_r_v", cfg.source.pbs_pump.r_v);
  cfg.source.pbs_pump.leak_v = p.number("source.pbs_leak_v", cfg.source.pbs_pump.leak_v);
  cfg.source.l_a = p.number("source.l_a_m", cfg.source.l_a);
  cfg.source.l_b = p.number("source.l_b_m", cfg.source.l_b);
  const double lambda_s = p.number("source.lambda_signal_nm", 810.0);
  const double lambda_i = p.number("source.lambda_idler_nm", 810.0);
  if (!(lambda_s > 0.0) || !(lambda_i > 0.0)) {
    throw std::invalid_argument("config: source wavelengths must be > 0");
  }
  cfg.source.k_s = 2.0 * pi / (lambda_s * 1e-9);
  cfg.source.k_i = 2.0 * pi / (lambda_i * 1e-9);
  cfg.source.theta_s = deg_to_rad(p.number("source.theta_s_deg", 0.0));
  cfg.source.theta_i = deg_to_rad(p.number("source.theta_i_deg", 0.0));
  cfg.source.theta_p = deg_to_rad(p.number("source.theta_p_deg", 0.0));
  cfg.source.pair_rate_per_mw =
      p.number("source.pair_rate_per_mw", cfg.source.pair_rate_per_mw);
  cfg.source.flux_reference_usable_fraction =
      p.number("source.flux_reference_usable_fraction",
               cfg.source.flux_reference_usable_fraction);

  cfg.pump_power_mw = p.number("pump.power_mw", cfg.pump_power_mw);
  cfg.auto_balance = p.boolean("pump.auto_balance", cfg.auto_balance);
  cfg.target_phi = deg_to_rad(p.number("pump.target_phi_deg", 180.0));
  cfg.hwp1_angle = deg_to_rad(p.number("pump.hwp1_deg", 0.0));
  cfg.qwp1_angle = deg_to_rad(p.number("pump.qwp1_deg", 0.0));

  cfg.detection.det_eff_1 = p.number("detection.det_eff_1", cfg.detection.det_eff_1);
  cfg.detection.det_eff_2 = p.number("detection.det_eff_2", cfg.detection.det_eff_2);
  cfg.detection.dark_rate_1 = p.number("detection.dark_rate_1", cfg.detection.dark_rate_1);
  cfg.detection.dark_rate_2 = p.number("detection.dark_rate_2", cfg.detection.dark_rate_2);
  cfg.detection.coincidence_window =
      p.number("detection.coincidence_window_s", cfg.detection.coincidence_window);
  cfg.detection.integration_time =
      p.number("detection.integration_time_s", cfg.detection.integration_time);
  cfg.detection.rng_seed = p.integer("detection.seed", cfg.detection.rng_seed);
  cfg.detection.pump_power_mw = cfg.pump_power_mw;

  const std::string mode = p.text("dephasing.mode", "coherence");
  if (mode == "none") {
    cfg.dephasing_mode = DephasingMode::none;
  } else if (mode == "coherence") {
    cfg.dephasing_mode = DephasingMode::coherence;
  } else if (mode == "divergence") {
    cfg.dephasing_mode = DephasingMode::divergence;
  } else {
    throw std::invalid_argument("config key 'dephasing.mode': expected none|coherence|divergence");
  }
  cfg.coherence_d = p.number("dephasing.coherence_d", cfg.coherence_d);
  cfg.divergence_mrad = p.number("dephasing.divergence_mrad", cfg.divergence_mrad);
  cfg.aperture_cal.slope =
      p.number("dephasing.cal_slope_rad_per_mrad", cfg.aperture_cal.slope);
  cfg.aperture_cal.offset = p.number("dephasing.cal_offset_rad", cfg.aperture_cal.offset);

  cfg.flux_model.reference_divergence_mrad =
      p.number("flux.reference_divergence_mrad", cfg.flux_model.reference_divergence_mrad);
  cfg.flux_model.exponent = p.number("flux.aperture_exponent", cfg.flux_model.exponent);

  cfg.theta1_start = deg_to_rad(p.number("scan.theta1_start_deg", 0.0));
  cfg.theta1_stop = deg_to_rad(p.number("scan.theta1_stop_deg", 360.0));
  cfg.theta1_points = static_cast<int>(p.integer("scan.theta1_points", 19));
  cfg.theta2 = deg_to_rad(p.number("scan.theta2_deg", 0.0));

  if (p.has("chsh.angles_deg")) {
    const std::vector<double> a = p.number_list("chsh.angles_deg");
    if (a.size() != 8) {
      throw std::invalid_argument(
          "config key 'chsh.angles_deg': expected 8 comma-separated degrees "
          "(theta1,theta2 for each of 4 pairs)");
    }
    for (int k = 0; k < 4; ++k) {
      cfg.chsh_angles[k] = {deg_to_rad(a[2 * k]), deg_to_rad(a[2 * k + 1])};
    }
  }

  cfg.fringe_csv = p.text("output.fringe_csv", cfg.fringe_csv);
  cfg.fringe_report = p.text("output.fringe_report", cfg.fringe_report);
  cfg.chsh_csv = p.text("output.chsh_csv", cfg.chsh_csv);
  cfg.chsh_report = p.text("output.chsh_report", cfg.chsh_report);
  cfg.sweep_csv = p.text("output.sweep_csv", cfg.sweep_csv);
  cfg.balance_report = p.text("output.balance_report", cfg.balance_report);

  p.reject_unknown();
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  return parse_config(in, path);
}

}  // namespace sagnac
