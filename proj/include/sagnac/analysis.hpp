// analysis.hpp
// Fringe fitting, visibility, and CHSH statistics with Poisson error
// propagation.
//
// The fringe model is C(theta1) = c0 [1 + V cos(2 (theta1 - theta0))],
// fit by weighted nonlinear least squares with Poisson weights
// 1/max(C_i, 1). Parameter uncertainties come from the inverse
// curvature (J^T W J)^{-1} at the optimum.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sagnac/detection.hpp"

namespace sagnac {

/// Fringe-fit output. phase_offset is canonicalized to (-pi/2, pi/2]
/// (the model has period pi in the offset) with visibility >= 0;
/// visibility is clamped into [0, 1] at the boundary.
struct FitResult {
  double c0 = 0.0;
  double visibility = 0.0;
  double phase_offset = 0.0;
  double sigma_c0 = 0.0;
  double sigma_v = 0.0;
  double sigma_phase = 0.0;
  double chi2_per_dof = 0.0;
  std::vector<double> residuals;
  /// Set when the phase is effectively unconstrained (flat data).
  bool phase_unconstrained = false;
};

struct ChshResult {
  std::array<double, 4> e_values{};
  std::array<double, 4> e_sigmas{};
  double s = 0.0;
  double sigma_s = 0.0;
};

/// Fringe visibility (c_max - c_min) / (c_max + c_min).
inline double visibility(double c_max, double c_min) {
  if (!(c_max >= c_min) || !(c_min >= 0.0)) {
    throw std::invalid_argument("visibility: need c_max >= c_min >= 0");
  }
  if (!(c_max + c_min > 0.0)) {
    throw std::invalid_argument("visibility: c_max + c_min must be > 0");
  }
  return (c_max - c_min) / (c_max + c_min);
}

struct FitOptions {
  /// Fix V = 0 and fit the mean level only (degenerate-model check).
  bool fix_visibility_zero = false;
  int max_iterations = 200;
  double gradient_tol = 1e-8;
};

namespace detail {

struct FringeData {
  std::vector<double> theta;
  std::vector<double> counts;
  std::vector<double> weight;
};

inline FringeData make_fringe_data(const std::vector<double>& theta,
                                   const std::vector<double>& counts) {
  if (theta.size() != counts.size()) {
    throw std::invalid_argument("fit_fringe_points: size mismatch");
  }
  FringeData d;
  d.theta = theta;
  d.counts = counts;
  d.weight.reserve(counts.size());
  for (double c : counts) d.weight.push_back(1.0 / std::max(c, 1.0));
  return d;
}

inline double fringe_model(double c0, double v, double theta0, double theta) {
  return c0 * (1.0 + v * std::cos(2.0 * (theta - theta0)));
}

inline double chi2_of(const FringeData& d, double c0, double v, double theta0) {
  double chi2 = 0.0;
  for (std::size_t i = 0; i < d.theta.size(); ++i) {
    const double r = d.counts[i] - fringe_model(c0, v, theta0, d.theta[i]);
    chi2 += d.weight[i] * r * r;
  }
  return chi2;
}

/// Solve the symmetric 3x3 system A x = b by Gaussian elimination with
/// partial pivoting. Returns false when singular.
inline bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b,
                   std::array<double, 3>& x) {
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (std::abs(a[piv][col]) < 1e-300) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < 3; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
}

/// Invert a symmetric positive 3x3 matrix; returns false when singular.
inline bool invert3(const std::array<std::array<double, 3>, 3>& a,
                    std::array<std::array<double, 3>, 3>& inv) {
  for (int col = 0; col < 3; ++col) {
    std::array<double, 3> e{};
    e[col] = 1.0;
    std::array<double, 3> x{};
    if (!solve3(a, e, x)) return false;
    for (int r = 0; r < 3; ++r) inv[r][col] = x[r];
  }
  return true;
}

}  // namespace detail

/// Weighted sinusoidal fit of accidental-corrected fringe counts at
/// the given analyzer angles. Initial guess from the data extrema and
/// a 16-point coarse phase grid, then damped Gauss-Newton, capped at
/// opts.max_iterations.
inline FitResult fit_fringe_points(const std::vector<double>& theta,
                                   const std::vector<double>& corrected_counts,
                                   const FitOptions& opts = {}) {
  detail::FringeData d = detail::make_fringe_data(theta, corrected_counts);
  const std::size_t n = d.theta.size();

  // Identifiability: at least 4 distinct angles modulo the fringe period.
  {
    std::vector<double> reduced;
    for (double t : d.theta) {
      double r = std::fmod(t, pi);
      if (r < 0) r += pi;
      bool found = false;
      for (double q : reduced) {
        if (std::abs(q - r) < 1e-9 || std::abs(std::abs(q - r) - pi) < 1e-9) found = true;
      }
      if (!found) reduced.push_back(r);
    }
    if (reduced.size() < 4) {
      throw ConvergenceError("fit_fringe: under-determined scan (fewer than 4 distinct angles mod pi)");
    }
  }

  double mean = 0.0;
  double wsum = 0.0;
  double wmean = 0.0;
  double cmax = -std::numeric_limits<double>::infinity();
  double cmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    mean += d.counts[i];
    wsum += d.weight[i];
    wmean += d.weight[i] * d.counts[i];
    cmax = std::max(cmax, d.counts[i]);
    cmin = std::min(cmin, d.counts[i]);
  }
  mean /= static_cast<double>(n);
  wmean /= wsum;

  FitResult fit;
  if (opts.fix_visibility_zero) {
    // Model reduces to a weighted mean.
    fit.c0 = wmean;
    fit.visibility = 0.0;
    fit.phase_offset = 0.0;
    fit.sigma_c0 = 1.0 / std::sqrt(wsum);
    fit.sigma_v = 0.0;
    fit.sigma_phase = std::numeric_limits<double>::infinity();
    fit.phase_unconstrained = true;
    double chi2 = 0.0;
    fit.residuals.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = d.counts[i] - fit.c0;
      fit.residuals.push_back(r);
      chi2 += d.weight[i] * r * r;
    }
    fit.chi2_per_dof = chi2 / std::max<std::size_t>(1, n - 1);
    return fit;
  }

  // Initial guess.
  double c0 = mean;
  double v = 0.0;
  if (cmax + cmin > 0.0) {
    v = std::clamp((cmax - cmin) / (cmax + cmin), 0.0, 0.999);
  }
  double theta0 = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 16; ++k) {
    const double cand = -pi / 2.0 + pi * k / 16.0;
    const double chi2 = detail::chi2_of(d, c0, v, cand);
    if (chi2 < best) {
      best = chi2;
      theta0 = cand;
    }
  }

  // Damped Gauss-Newton.
  double chi2 = detail::chi2_of(d, c0, v, theta0);
  std::array<std::array<double, 3>, 3> jtj{};
  bool converged = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    jtj = {};
    std::array<double, 3> jtr{};
    for (std::size_t i = 0; i < n; ++i) {
      const double arg = 2.0 * (d.theta[i] - theta0);
      const double cosA = std::cos(arg);
      const double sinA = std::sin(arg);
      const double model = c0 * (1.0 + v * cosA);
      const double r = d.counts[i] - model;
      const std::array<double, 3> grad = {1.0 + v * cosA, c0 * cosA, 2.0 * c0 * v * sinA};
      for (int a = 0; a < 3; ++a) {
        jtr[a] += d.weight[i] * grad[a] * r;
        for (int b = 0; b < 3; ++b) jtj[a][b] += d.weight[i] * grad[a] * grad[b];
      }
    }
    // Gradient of chi^2 is -2 J^T W r; test it in scaled parameters.
    const std::array<double, 3> scale = {std::max(1.0, std::abs(c0)), 1.0, 1.0};
    double gnorm = 0.0;
    for (int a = 0; a < 3; ++a) gnorm = std::max(gnorm, std::abs(2.0 * jtr[a]) * scale[a]);
    if (gnorm <= opts.gradient_tol * (1.0 + chi2)) {
      converged = true;
      break;
    }
    std::array<double, 3> step{};
    if (!detail::solve3(jtj, jtr, step)) break;
    double lambda = 1.0;
    double next = detail::chi2_of(d, c0 + step[0], v + step[1], theta0 + step[2]);
    int halvings = 0;
    while (!(next <= chi2) && halvings < 30) {
      lambda *= 0.5;
      next = detail::chi2_of(d, c0 + lambda * step[0], v + lambda * step[1],
                             theta0 + lambda * step[2]);
      ++halvings;
    }
    if (!(next <= chi2)) {
      converged = chi2 < std::numeric_limits<double>::infinity();
      break;  // no further progress
    }
    c0 += lambda * step[0];
    v += lambda * step[1];
    theta0 += lambda * step[2];
    const double step_norm = std::hypot(lambda * step[0] / scale[0],
                                        std::hypot(lambda * step[1], lambda * step[2]));
    const bool stalled = (chi2 - next) <= 1e-14 * std::max(1.0, chi2);
    chi2 = next;
    if (step_norm < 1e-12 || stalled) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ConvergenceError("fit_fringe: no convergence within iteration cap");
  }

  // Canonical form: V >= 0 and theta0 in (-pi/2, pi/2].
  if (v < 0.0) {
    v = -v;
    theta0 += pi / 2.0;
  }
  theta0 = wrap_angle(2.0 * theta0) / 2.0;

  // Covariance from the inverse curvature at the optimum.
  jtj = {};
  for (std::size_t i = 0; i < n; ++i) {
    const double arg = 2.0 * (d.theta[i] - theta0);
    const double cosA = std::cos(arg);
    const double sinA = std::sin(arg);
    const std::array<double, 3> grad = {1.0 + v * cosA, c0 * cosA, 2.0 * c0 * v * sinA};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) jtj[a][b] += d.weight[i] * grad[a] * grad[b];
  }
  std::array<std::array<double, 3>, 3> cov{};
  const bool invertible = detail::invert3(jtj, cov);

  fit.c0 = c0;
  fit.visibility = std::clamp(v, 0.0, 1.0);
  fit.phase_offset = theta0;
  if (invertible) {
    fit.sigma_c0 = std::sqrt(std::max(0.0, cov[0][0]));
    fit.sigma_v = std::sqrt(std::max(0.0, cov[1][1]));
    fit.sigma_phase = std::sqrt(std::max(0.0, cov[2][2]));
  } else {
    fit.sigma_c0 = std::numeric_limits<double>::infinity();
    fit.sigma_v = std::numeric_limits<double>::infinity();
    fit.sigma_phase = std::numeric_limits<double>::infinity();
  }
  fit.phase_unconstrained =
      !invertible || fit.sigma_phase > 1.0 || fit.visibility <= 3.0 * fit.sigma_v;
  fit.residuals.reserve(n);
  double chi2_final = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = d.counts[i] - detail::fringe_model(c0, fit.visibility, theta0, d.theta[i]);
    fit.residuals.push_back(r);
    chi2_final += d.weight[i] * r * r;
  }
  fit.chi2_per_dof = chi2_final / std::max<std::size_t>(1, n - 3);
  return fit;
}

/// Fit a sampled fringe scan on its accidental-corrected counts.
inline FitResult fit_fringe(const FringeScan& scan, const FitOptions& opts = {}) {
  scan.validate();
  std::vector<double> theta;
  std::vector<double> counts;
  theta.reserve(scan.points.size());
  counts.reserve(scan.points.size());
  for (const CountRecord& rec : scan.points) {
    theta.push_back(rec.theta1);
    counts.push_back(subtract_accidentals(rec));
  }
  return fit_fringe_points(theta, counts, opts);
}

/// E = (C++ - C+- - C-+ + C--) / total with first-order Poisson
/// propagation, using the supplied counts as their own variances.
/// Counts are in (++, +-, -+, --) order.
inline std::pair<double, double> chsh_e(const std::array<double, 4>& counts) {
  const double total = counts[0] + counts[1] + counts[2] + counts[3];
  if (!(total > 0.0)) {
    throw std::invalid_argument("chsh_e: total counts must be > 0");
  }
  static constexpr std::array<double, 4> sign = {1.0, -1.0, -1.0, 1.0};
  double num = 0.0;
  for (int k = 0; k < 4; ++k) num += sign[k] * counts[k];
  const double e = num / total;
  double var = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double de = (sign[k] - e) / total;
    var += de * de * std::max(0.0, counts[k]);
  }
  return {e, std::sqrt(var)};
}

/// E from one CHSH measurement set using accidental-corrected counts.
/// Variances come from the raw (pre-subtraction) counts, plus the
/// singles-propagated variance of each accidental estimate when
/// include_accidental_variance is set (the default):
///   Var(corrected) = raw + est^2 (1/singles_1 + 1/singles_2).
inline std::pair<double, double> chsh_e(const ChshMeasurement& m,
                                        bool include_accidental_variance = true) {
  static constexpr std::array<double, 4> sign = {1.0, -1.0, -1.0, 1.0};
  std::array<double, 4> corrected{};
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    corrected[k] = subtract_accidentals(m.records[k]);
    total += corrected[k];
  }
  if (!(total > 0.0)) {
    throw std::invalid_argument("chsh_e: total corrected counts must be > 0");
  }
  double num = 0.0;
  for (int k = 0; k < 4; ++k) num += sign[k] * corrected[k];
  const double e = num / total;
  double var = 0.0;
  for (int k = 0; k < 4; ++k) {
    const CountRecord& rec = m.records[k];
    double v = static_cast<double>(rec.coincidences_raw);
    if (include_accidental_variance && rec.singles_1 > 0 && rec.singles_2 > 0) {
      v += rec.accidental_estimate * rec.accidental_estimate *
           (1.0 / static_cast<double>(rec.singles_1) +
            1.0 / static_cast<double>(rec.singles_2));
    }
    const double de = (sign[k] - e) / total;
    var += de * de * v;
  }
  return {e, std::sqrt(var)};
}

/// S = |E1 + E2 + E3 - E4| with sigma_S from quadrature, for E values
/// ordered as the standard angle set.
inline ChshResult chsh_s(const std::array<std::pair<double, double>, 4>& e) {
  ChshResult r;
  double s = 0.0;
  double var = 0.0;
  for (int k = 0; k < 4; ++k) {
    r.e_values[k] = e[k].first;
    r.e_sigmas[k] = e[k].second;
    s += (k == 3 ? -1.0 : 1.0) * e[k].first;
    var += e[k].second * e[k].second;
  }
  r.s = std::abs(s);
  r.sigma_s = std::sqrt(var);
  return r;
}

/// Spectral brightness: pairs/s per mW of pump per nm of bandwidth.
inline double brightness(double pairs_detected, double duration_s, double pump_mw,
                         double bandwidth_nm) {
  if (!(duration_s > 0.0) || !(pump_mw > 0.0) || !(bandwidth_nm > 0.0)) {
    throw std::invalid_argument("brightness: denominators must be > 0");
  }
  return pairs_detected / (duration_s * pump_mw * bandwidth_nm);
}

}  // namespace sagnac
