// source.hpp
// Biphoton-state synthesis for a bidirectionally pumped polarization
// Sagnac down-conversion source.
//
// The pump field E_H e_H + e^{i phi_p} E_V e_V drives two coherent
// type-II SPDC processes: the transmitted H component pumps the
// counterclockwise pass and yields (after the intracavity HWP) a
// |V_s H_i> pair, the reflected V component pumps the clockwise pass
// and yields |H_s V_i>. Because the pump and output wavenumbers
// satisfy k_p = k_s + k_i, the common path phase drops out of the
// relative phase and the combined output is
//
//     |psi>  ~  |H_s V_i> + e^{i phi} beta |V_s H_i>,
//     phi  = theta_s + theta_i - theta_p - phi_p,
//     beta = eta_H sqrt(t_h) E_H / (eta_V sqrt(r_v) E_V),
//
// independent of the interferometer path lengths.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include "sagnac/biphoton.hpp"
#include "sagnac/jones.hpp"

namespace sagnac {

/// Numerical solver failure (root finding or curve fitting).
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Classical pump field. Amplitudes carry sqrt(mW) units so that
/// total power = |e_h|^2 + |e_v|^2; the relative phase is
/// phi_p = arg(e_v) - arg(e_h).
struct PumpField {
  Complex e_h{0.0, 0.0};
  Complex e_v{0.0, 0.0};

  PumpField() = default;
  PumpField(Complex h, Complex v) : e_h(h), e_v(v) {
    require_finite(e_h, "PumpField.e_h");
    require_finite(e_v, "PumpField.e_v");
    if (power_mw() <= 0.0) {
      throw std::invalid_argument("PumpField: total power must be > 0");
    }
  }

  double power_mw() const { return std::norm(e_h) + std::norm(e_v); }

  /// arg(e_v) - arg(e_h), wrapped to (-pi, pi]. Zero-amplitude
  /// components contribute arg = 0.
  double phi_p() const { return wrap_angle(std::arg(e_v) - std::arg(e_h)); }
};

/// Pump-wavelength behaviour of the interferometer PBS. Power
/// fractions: t_h of the H pump is transmitted into the
/// counterclockwise path, r_v of the V pump reflected into the
/// clockwise path; leak_* goes to the wrong port and, like the
/// remainder (back reflection / absorption), never drives
/// down-conversion.
struct PbsPump {
  double t_h = 0.73;
  double leak_h = 0.03;
  double r_v = 0.80;
  double leak_v = 0.05;
};

/// Source configuration: generation efficiencies, PBS pump behaviour,
/// geometry, wave numbers and HWP dispersion phases.
struct SourceParams {
  double eta_h = 1.0;  ///< generation efficiency, counterclockwise (H-pumped) pass
  double eta_v = 1.0;  ///< generation efficiency, clockwise (V-pumped) pass
  PbsPump pbs_pump{};
  double l_a = 0.10;  ///< PBS -> crystal path A, meters
  double l_b = 0.12;  ///< crystal -> PBS path B, meters
  double k_s = 2.0 * pi / 810e-9;  ///< signal wavenumber, rad/m
  double k_i = 2.0 * pi / 810e-9;  ///< idler wavenumber, rad/m
  double theta_s = 0.0;  ///< HWP dispersion phase on the signal, radians
  double theta_i = 0.0;  ///< HWP dispersion phase on the idler, radians
  double theta_p = 0.0;  ///< HWP dispersion phase on the clockwise pump, radians
  double pair_rate_per_mw = 5000.0;  ///< detected pairs/s per mW of input pump
  /// Usable-pump fraction at which pair_rate_per_mw is calibrated.
  /// Default is the balanced-pump value 2 t_h r_v / (t_h + r_v) for the
  /// default PBS, so a lossless PBS raises the flux by ~31%.
  double flux_reference_usable_fraction = 2.0 * 0.73 * 0.80 / (0.73 + 0.80);

  /// Pump wavenumber; k_p = k_s + k_i holds by construction.
  double k_p() const { return k_s + k_i; }

  void validate() const {
    auto check = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("SourceParams: ") + what);
    };
    check(std::isfinite(eta_h) && eta_h > 0.0, "eta_h must be > 0");
    check(std::isfinite(eta_v) && eta_v > 0.0, "eta_v must be > 0");
    auto frac = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
    check(frac(pbs_pump.t_h), "pbs_pump.t_h must be in [0,1]");
    check(frac(pbs_pump.leak_h), "pbs_pump.leak_h must be in [0,1]");
    check(frac(pbs_pump.r_v), "pbs_pump.r_v must be in [0,1]");
    check(frac(pbs_pump.leak_v), "pbs_pump.leak_v must be in [0,1]");
    check(pbs_pump.t_h + pbs_pump.leak_h <= 1.0 + 1e-12, "pbs_pump.t_h + leak_h must be <= 1");
    check(pbs_pump.r_v + pbs_pump.leak_v <= 1.0 + 1e-12, "pbs_pump.r_v + leak_v must be <= 1");
    check(std::isfinite(l_a) && l_a >= 0.0, "l_a must be >= 0");
    check(std::isfinite(l_b) && l_b >= 0.0, "l_b must be >= 0");
    check(std::isfinite(k_s) && k_s > 0.0, "k_s must be > 0");
    check(std::isfinite(k_i) && k_i > 0.0, "k_i must be > 0");
    check(std::isfinite(theta_s), "theta_s must be finite");
    check(std::isfinite(theta_i), "theta_i must be finite");
    check(std::isfinite(theta_p), "theta_p must be finite");
    check(std::isfinite(pair_rate_per_mw) && pair_rate_per_mw > 0.0,
          "pair_rate_per_mw must be > 0");
    check(std::isfinite(flux_reference_usable_fraction) &&
              flux_reference_usable_fraction > 0.0 &&
              flux_reference_usable_fraction <= 1.0,
          "flux_reference_usable_fraction must be in (0,1]");
  }
};

/// Synthesized source output: the biphoton state plus the relative
/// amplitude/phase of its two components and pump-power bookkeeping.
struct SourceOutput {
  MeasurableState state = BiphotonState::singlet();
  double beta = 0.0;  ///< |a_VH| / |a_HV|; +inf when the HV component vanishes
  double phi = 0.0;   ///< arg(a_VH) - arg(a_HV) in (-pi, pi]; 0 if undefined
  double usable_pump_mw = 0.0;    ///< t_h |e_h|^2 + r_v |e_v|^2
  double total_pump_mw = 0.0;     ///< |e_h|^2 + |e_v|^2
  double pair_rate_per_mw = 0.0;  ///< carried over from SourceParams
  double flux_reference_usable_fraction = 1.0;

  double usable_fraction() const {
    return total_pump_mw > 0.0 ? usable_pump_mw / total_pump_mw : 0.0;
  }

  const BiphotonState& pure_state() const {
    return std::get<BiphotonState>(state);
  }
};

/// Transform an H-polarized input of the given power through HWP1 at
/// hwp1_angle and then QWP1 at qwp1_angle.
inline PumpField prepare_pump(double input_power_mw, double hwp1_angle, double qwp1_angle) {
  require_finite(hwp1_angle, "prepare_pump.hwp1_angle");
  require_finite(qwp1_angle, "prepare_pump.qwp1_angle");
  if (!(input_power_mw > 0.0) || !std::isfinite(input_power_mw)) {
    throw std::invalid_argument("prepare_pump: input power must be > 0");
  }
  const JonesVector in(Complex(std::sqrt(input_power_mw), 0.0), Complex(0.0, 0.0));
  const JonesVector out =
      quarter_wave_plate(qwp1_angle).apply(half_wave_plate(hwp1_angle).apply(in));
  return {out.h, out.v};
}

/// Combine the two counter-propagating SPDC amplitudes into the output
/// biphoton state.
inline SourceOutput sagnac_state(const PumpField& pump, const SourceParams& params) {
  params.validate();

  // Common propagation phase k_p (l_a + l_b), shared by both passes
  // since k_p = k_s + k_i. Reduced mod 2*pi up front so that the two
  // per-pass phases stay O(1) and their difference is exact.
  const double kp = params.k_p();
  const double common = std::remainder(kp * params.l_a + kp * params.l_b, 2.0 * pi);

  // Counterclockwise, H-pumped pass -> |V_s H_i>; phase from the pump
  // run to the crystal plus the HWP phases on both outputs.
  const Complex a_vh = std::polar(1.0, common + params.theta_s + params.theta_i) *
                       (params.eta_h * std::sqrt(params.pbs_pump.t_h)) * pump.e_h;
  // Clockwise, V-pumped pass -> |H_s V_i>; the pump HWP phase theta_p
  // applies and phi_p is carried inside e_v.
  const Complex a_hv = std::polar(1.0, common + params.theta_p) *
                       (params.eta_v * std::sqrt(params.pbs_pump.r_v)) * pump.e_v;

  const double mag_hv = std::abs(a_hv);
  const double mag_vh = std::abs(a_vh);
  if (std::hypot(mag_hv, mag_vh) < 1e-12) {
    throw std::invalid_argument(
        "sagnac_state: both path amplitudes vanish (no down-conversion)");
  }

  SourceOutput out;
  out.state = BiphotonState::from_amplitudes(
      {Complex(0, 0), a_hv, a_vh, Complex(0, 0)});
  if (mag_hv > 0.0) {
    out.beta = mag_vh / mag_hv;
    out.phi = (mag_vh > 0.0) ? wrap_angle(std::arg(a_vh) - std::arg(a_hv)) : 0.0;
  } else {
    out.beta = std::numeric_limits<double>::infinity();
    out.phi = 0.0;
  }
  out.usable_pump_mw = params.pbs_pump.t_h * std::norm(pump.e_h) +
                       params.pbs_pump.r_v * std::norm(pump.e_v);
  out.total_pump_mw = pump.power_mw();
  out.pair_rate_per_mw = params.pair_rate_per_mw;
  out.flux_reference_usable_fraction = params.flux_reference_usable_fraction;
  return out;
}

/// Pump-preparation angles solved by balance_solve.
struct BalanceSolution {
  double hwp1_angle = 0.0;
  double qwp1_angle = 0.0;
  double beta = 0.0;  ///< round-trip verification
  double phi = 0.0;
  int iterations = 0;
};

namespace detail {

struct BalanceResidual {
  double r_beta;
  double r_phi;
  double norm() const { return std::hypot(r_beta, r_phi); }
};

inline BalanceResidual balance_residual(double hwp1, double qwp1,
                                        const SourceParams& params, double target_phi) {
  const SourceOutput out = sagnac_state(prepare_pump(1.0, hwp1, qwp1), params);
  if (!std::isfinite(out.beta)) {
    return {std::numeric_limits<double>::infinity(), 0.0};
  }
  return {out.beta - 1.0, wrap_angle(out.phi - target_phi)};
}

}  // namespace detail

/// Solve for (HWP1, QWP1) angles that balance the source (beta = 1) at
/// the requested output phase. Damped Newton iteration on the residual
/// (beta - 1, wrapped phase error) with a central finite-difference
/// Jacobian; starts from (pi/8, pi/4) and falls back to the best point
/// of a fixed 8x8 angle grid if that stalls. Deterministic throughout.
inline BalanceSolution balance_solve(const SourceParams& params, double target_phi) {
  params.validate();
  require_finite(target_phi, "balance_solve.target_phi");

  constexpr int max_iterations = 100;
  constexpr double fd_step = 1e-7;
  constexpr double step_tol = 1e-10;
  constexpr double residual_tol = 1e-12;

  auto residual = [&](double h, double q) {
    return detail::balance_residual(h, q, params, target_phi);
  };

  auto newton = [&](double h, double q, int budget, int& used) -> BalanceSolution {
    detail::BalanceResidual r = residual(h, q);
    for (used = 0; used < budget; ++used) {
      if (r.norm() <= residual_tol) break;
      // Central-difference Jacobian of (r_beta, r_phi) wrt (h, q).
      const auto rh_p = residual(h + fd_step, q);
      const auto rh_m = residual(h - fd_step, q);
      const auto rq_p = residual(h, q + fd_step);
      const auto rq_m = residual(h, q - fd_step);
      const double j00 = (rh_p.r_beta - rh_m.r_beta) / (2.0 * fd_step);
      const double j01 = (rq_p.r_beta - rq_m.r_beta) / (2.0 * fd_step);
      const double j10 = (rh_p.r_phi - rh_m.r_phi) / (2.0 * fd_step);
      const double j11 = (rq_p.r_phi - rq_m.r_phi) / (2.0 * fd_step);
      const double det = j00 * j11 - j01 * j10;
      if (!std::isfinite(det) || std::abs(det) < 1e-14) break;
      double dh = -(j11 * r.r_beta - j01 * r.r_phi) / det;
      double dq = -(-j10 * r.r_beta + j00 * r.r_phi) / det;
      // Damping: halve the step until the residual norm decreases.
      double lambda = 1.0;
      detail::BalanceResidual r_next = residual(h + dh, q + dq);
      int halvings = 0;
      while (!(r_next.norm() < r.norm()) && halvings < 40) {
        lambda *= 0.5;
        r_next = residual(h + lambda * dh, q + lambda * dq);
        ++halvings;
      }
      if (!(r_next.norm() < r.norm())) break;  // stalled
      h += lambda * dh;
      q += lambda * dq;
      r = r_next;
      if (std::hypot(lambda * dh, lambda * dq) < step_tol && r.norm() < 1e-9) break;
    }
    BalanceSolution sol;
    sol.hwp1_angle = h;
    sol.qwp1_angle = q;
    const SourceOutput out = sagnac_state(prepare_pump(1.0, h, q), params);
    sol.beta = out.beta;
    sol.phi = out.phi;
    return sol;
  };

  int used = 0;
  BalanceSolution sol = newton(pi / 8.0, pi / 4.0, max_iterations, used);
  bool converged = std::isfinite(sol.beta) && std::abs(sol.beta - 1.0) <= 1e-6 &&
                   std::abs(wrap_angle(sol.phi - target_phi)) <= 1e-6;
  if (!converged) {
    // Deterministic multistart: best residual on a fixed coarse grid.
    double best_h = pi / 8.0;
    double best_q = pi / 4.0;
    double best_norm = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j) {
        const double h = -pi / 2.0 + (i + 0.5) * pi / 8.0;
        const double q = -pi / 2.0 + (j + 0.5) * pi / 8.0;
        const double n = residual(h, q).norm();
        if (n < best_norm) {
          best_norm = n;
          best_h = h;
          best_q = q;
        }
      }
    }
    int used2 = 0;
    sol = newton(best_h, best_q, max_iterations, used2);
    used += used2 + 64;
    converged = std::isfinite(sol.beta) && std::abs(sol.beta - 1.0) <= 1e-6 &&
                std::abs(wrap_angle(sol.phi - target_phi)) <= 1e-6;
  }
  sol.iterations = used;
  if (!converged) {
    throw ConvergenceError(
        "balance_solve: no convergence within iteration cap (unphysical parameters?)");
  }
  return sol;
}

/// Gaussian-phase dephasing of the |HV>/|VH> coherence: the clockwise
/// and counterclockwise contributions acquire a random relative phase
/// with spread sigma_phi across the collected modes, damping the
/// cross coherence by d = exp(-sigma_phi^2 / 2). Diagonal populations
/// are untouched (bit-identical).
inline DensityState apply_dephasing(const BiphotonState& state, double sigma_phi) {
  if (!(sigma_phi >= 0.0)) {
    throw std::invalid_argument("apply_dephasing: sigma_phi must be >= 0");
  }
  const double d = std::exp(-0.5 * sigma_phi * sigma_phi);
  std::array<Complex, 16> rho;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      Complex e = state.amp(i) * std::conj(state.amp(j));
      // Phase-average of the mixture of unitaries diag(1,1,e^{i d},1):
      // every coherence with the VH component damps by d.
      if ((i == basis::VH) != (j == basis::VH)) e *= d;
      rho[4 * i + j] = e;
    }
  }
  return DensityState::from_matrix(rho);
}

/// Coherence factor of the dephasing channel.
inline double coherence_factor(double sigma_phi) {
  return std::exp(-0.5 * sigma_phi * sigma_phi);
}

/// Phase spread that yields a given coherence factor d in (0, 1].
inline double sigma_for_coherence(double d) {
  if (!(d > 0.0) || d > 1.0) {
    throw std::invalid_argument("sigma_for_coherence: d must be in (0,1]");
  }
  return std::sqrt(-2.0 * std::log(d));
}

/// Linear phenomenological bridge from collection divergence angle to
/// the dephasing phase spread.
struct ApertureCalibration {
  double slope = 0.0;   ///< rad per mrad
  double offset = 0.0;  ///< rad

  void validate() const {
    if (!std::isfinite(slope) || slope < 0.0) {
      throw std::invalid_argument("ApertureCalibration: slope must be >= 0");
    }
    require_finite(offset, "ApertureCalibration.offset");
  }
};

/// sigma_phi = max(0, offset + slope * divergence); monotone
/// non-decreasing in the divergence angle.
inline double aperture_to_sigma(double divergence_mrad, const ApertureCalibration& cal) {
  if (!(divergence_mrad >= 0.0)) {
    throw std::invalid_argument("aperture_to_sigma: divergence must be >= 0");
  }
  cal.validate();
  return std::max(0.0, cal.offset + cal.slope * divergence_mrad);
}

/// Two-point calibration of the divergence -> sigma_phi line from
/// (divergence, visibility) anchors.
inline ApertureCalibration calibrate_aperture(double div1_mrad, double vis1,
                                              double div2_mrad, double vis2) {
  const double s1 = sigma_for_coherence(vis1);
  const double s2 = sigma_for_coherence(vis2);
  if (!(div2_mrad > div1_mrad)) {
    throw std::invalid_argument("calibrate_aperture: anchors must have div2 > div1");
  }
  ApertureCalibration cal;
  cal.slope = (s2 - s1) / (div2_mrad - div1_mrad);
  cal.offset = s1 - cal.slope * div1_mrad;
  cal.validate();
  return cal;
}

/// Default calibration: 96.85% visibility at 12.5 mrad full divergence
/// and 93.0% at a nominal open-aperture divergence of 30 mrad. The
/// 30 mrad figure is a modeling default, not a measured value.
inline ApertureCalibration default_aperture_calibration() {
  return calibrate_aperture(12.5, 0.9685, 30.0, 0.930);
}

/// Collected pair flux vs divergence: power law through the reference
/// point, scale(ref) = 1. Exponent defaulted from the anchor pair
/// (12.5 mrad, 5000 pairs/s/mW) and (30 mrad, 22750 pairs/s/mW).
struct FluxApertureModel {
  double reference_divergence_mrad = 12.5;
  double exponent = std::log(22750.0 / 5000.0) / std::log(30.0 / 12.5);

  double scale(double divergence_mrad) const {
    if (!(divergence_mrad >= 0.0)) {
      throw std::invalid_argument("FluxApertureModel: divergence must be >= 0");
    }
    if (divergence_mrad == 0.0) return 0.0;
    return std::pow(divergence_mrad / reference_divergence_mrad, exponent);
  }
};

}  // namespace sagnac
