// detection.hpp
// Expected singles/coincidence rates under analyzer settings, and
// Poisson Monte-Carlo sampling of photon-counting records with
// accidental-coincidence bookkeeping.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sagnac/biphoton.hpp"
#include "sagnac/rng.hpp"
#include "sagnac/source.hpp"

namespace sagnac {

struct DetectionConfig {
  double det_eff_1 = 1.0;  ///< arm-1 detection efficiency
  double det_eff_2 = 1.0;
  /// Uncorrelated singles background per arm (detector dark counts plus
  /// partner-loss singles). Defaults reconstruct ~1e5 singles/s at the
  /// default pair rate; they are a modeling default, not a measurement.
  double dark_rate_1 = 91800.0;
  double dark_rate_2 = 91800.0;
  double coincidence_window = 1e-9;  ///< seconds
  double integration_time = 40.0;   ///< seconds per record
  double pump_power_mw = 3.28;
  std::uint64_t rng_seed = 12345;

  void validate() const {
    auto check = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("DetectionConfig: ") + what);
    };
    auto eff = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
    check(eff(det_eff_1), "det_eff_1 must be in [0,1]");
    check(eff(det_eff_2), "det_eff_2 must be in [0,1]");
    check(std::isfinite(dark_rate_1) && dark_rate_1 >= 0.0, "dark_rate_1 must be >= 0");
    check(std::isfinite(dark_rate_2) && dark_rate_2 >= 0.0, "dark_rate_2 must be >= 0");
    check(std::isfinite(coincidence_window) && coincidence_window > 0.0,
          "coincidence_window must be > 0");
    check(std::isfinite(integration_time) && integration_time > 0.0,
          "integration_time must be > 0");
    check(std::isfinite(pump_power_mw) && pump_power_mw > 0.0,
          "pump_power_mw must be > 0");
  }
};

/// One photon-counting acquisition at fixed analyzer settings.
struct CountRecord {
  double theta1 = 0.0;
  double theta2 = 0.0;
  std::int64_t singles_1 = 0;
  std::int64_t singles_2 = 0;
  std::int64_t coincidences_raw = 0;
  double accidental_estimate = 0.0;  ///< from the sampled singles rates
  double duration = 0.0;
};

/// Coincidence fringe: records over a theta1 grid at fixed theta2.
struct FringeScan {
  double theta2 = 0.0;
  std::vector<CountRecord> points;

  void validate() const {
    if (points.size() < 8) {
      throw std::invalid_argument("FringeScan: needs >= 8 points for fit identifiability");
    }
    for (std::size_t i = 1; i < points.size(); ++i) {
      if (!(points[i].theta1 > points[i - 1].theta1)) {
        throw std::invalid_argument("FringeScan: theta1 grid must be strictly increasing");
      }
    }
  }
};

struct ExpectedRates {
  double r1 = 0.0;  ///< arm-1 singles, counts/s
  double r2 = 0.0;
  double rc = 0.0;  ///< true coincidences, counts/s (no darks, no accidentals)
};

/// Detected pair flux in pairs/s: the configured pairs/s/mW normalization
/// times the pump power, rescaled by the source's usable-pump fraction
/// relative to its calibration reference.
inline double pair_flux(const SourceOutput& source, const DetectionConfig& cfg) {
  return source.pair_rate_per_mw * cfg.pump_power_mw *
         (source.usable_fraction() / source.flux_reference_usable_fraction);
}

/// Mean rates at analyzer settings (theta1, theta2). Dark counts enter
/// the singles only; true coincidences exclude them.
inline ExpectedRates expected_rates(const MeasurableState& state, double theta1,
                                    double theta2, const SourceOutput& source,
                                    const DetectionConfig& cfg) {
  cfg.validate();
  const double pairs = pair_flux(source, cfg);
  ExpectedRates r;
  r.rc = pairs * joint_probability(state, theta1, theta2) * cfg.det_eff_1 * cfg.det_eff_2;
  r.r1 = pairs * marginal_probability(state, 1, theta1) * cfg.det_eff_1 + cfg.dark_rate_1;
  r.r2 = pairs * marginal_probability(state, 2, theta2) * cfg.det_eff_2 + cfg.dark_rate_2;
  return r;
}

/// Accidental coincidence rate r1 * r2 * window for uncorrelated clicks.
inline double accidental_rate(double r1, double r2, double window) {
  if (!(r1 >= 0.0) || !(r2 >= 0.0) || !(window >= 0.0)) {
    throw std::invalid_argument("accidental_rate: inputs must be >= 0");
  }
  return r1 * r2 * window;
}

/// Draw one CountRecord. Singles and raw coincidences are independent
/// Poisson variates; the raw-coincidence mean includes the accidental
/// rate computed from the expected singles rates. The record's
/// accidental_estimate is re-derived from the *sampled* singles, as an
/// experimenter would. Draw order (singles_1, singles_2, coincidences)
/// is part of the determinism contract.
inline CountRecord sample_counts(const ExpectedRates& rates, double theta1, double theta2,
                                 double duration, double window, Rng& rng) {
  if (!(duration > 0.0)) {
    throw std::invalid_argument("sample_counts: duration must be > 0");
  }
  CountRecord rec;
  rec.theta1 = theta1;
  rec.theta2 = theta2;
  rec.duration = duration;
  rec.singles_1 = sample_poisson(rng, rates.r1 * duration);
  rec.singles_2 = sample_poisson(rng, rates.r2 * duration);
  const double acc = accidental_rate(rates.r1, rates.r2, window);
  rec.coincidences_raw = sample_poisson(rng, (rates.rc + acc) * duration);
  rec.accidental_estimate =
      accidental_rate(rec.singles_1 / duration, rec.singles_2 / duration, window) * duration;
  return rec;
}

/// Raw coincidences minus the accidental estimate. May be negative;
/// preserved as-is so downstream error propagation stays unbiased.
inline double subtract_accidentals(const CountRecord& rec) {
  return static_cast<double>(rec.coincidences_raw) - rec.accidental_estimate;
}

/// Simulate a fringe scan at fixed theta2. Each point's random stream
/// derives from (cfg.rng_seed, scan_id, point index), so points are
/// order-independent.
inline FringeScan run_fringe(const SourceOutput& source, double theta2,
                             const std::vector<double>& theta1_grid,
                             const DetectionConfig& cfg, std::uint64_t scan_id = 0) {
  cfg.validate();
  require_finite(theta2, "run_fringe.theta2");
  FringeScan scan;
  scan.theta2 = theta2;
  scan.points.reserve(theta1_grid.size());
  const std::uint64_t scan_seed = mix_seed(cfg.rng_seed, scan_id);
  for (std::size_t i = 0; i < theta1_grid.size(); ++i) {
    const double theta1 = theta1_grid[i];
    const ExpectedRates rates = expected_rates(source.state, theta1, theta2, source, cfg);
    Rng rng = derive_stream(scan_seed, i);
    scan.points.push_back(sample_counts(rates, theta1, theta2, cfg.integration_time,
                                        cfg.coincidence_window, rng));
  }
  scan.validate();
  return scan;
}

/// One CHSH analyzer pair (theta1, theta2) with its four outcome
/// combinations, ordered (++, +-, -+, --): the first sign is analyzer 1
/// at theta1 (+) or theta1 + pi/2 (-), the second likewise for
/// analyzer 2.
struct ChshMeasurement {
  double theta1 = 0.0;
  double theta2 = 0.0;
  std::array<CountRecord, 4> records;

  static constexpr std::array<const char*, 4> labels() {
    return {"++", "+-", "-+", "--"};
  }
};

using ChshAngleSet = std::array<std::array<double, 2>, 4>;

/// Analyzer settings for the standard four correlation measurements:
/// (0, 7pi/8), (-pi/4, 7pi/8), (-pi/4, 5pi/8), (0, 5pi/8).
inline ChshAngleSet default_chsh_angles() {
  return {{{0.0, 7.0 * pi / 8.0},
           {-pi / 4.0, 7.0 * pi / 8.0},
           {-pi / 4.0, 5.0 * pi / 8.0},
           {0.0, 5.0 * pi / 8.0}}};
}

/// Simulate the 16 coincidence acquisitions of a CHSH run: four outcome
/// combinations for each analyzer pair, each integrated over
/// cfg.integration_time. Streams derive from (seed, pair, combo).
inline std::array<ChshMeasurement, 4> run_chsh(const SourceOutput& source,
                                               const DetectionConfig& cfg,
                                               const ChshAngleSet& angles) {
  cfg.validate();
  std::array<ChshMeasurement, 4> result;
  for (std::size_t pair = 0; pair < 4; ++pair) {
    ChshMeasurement& m = result[pair];
    m.theta1 = angles[pair][0];
    m.theta2 = angles[pair][1];
    const std::uint64_t pair_seed = mix_seed(cfg.rng_seed, 0x434853ULL + pair);
    for (int combo = 0; combo < 4; ++combo) {
      const double th1 = m.theta1 + ((combo & 2) ? pi / 2.0 : 0.0);
      const double th2 = m.theta2 + ((combo & 1) ? pi / 2.0 : 0.0);
      const ExpectedRates rates = expected_rates(source.state, th1, th2, source, cfg);
      Rng rng = derive_stream(pair_seed, static_cast<std::uint64_t>(combo));
      m.records[combo] = sample_counts(rates, th1, th2, cfg.integration_time,
                                       cfg.coincidence_window, rng);
    }
  }
  return result;
}

}  // namespace sagnac
