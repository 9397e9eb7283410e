// biphoton.hpp
// Two-photon polarization states over signal (x) idler and Born-rule
// projection probabilities. Basis order is fixed globally as
// (HH, HV, VH, VV), index = 2*signal + idler with H=0, V=1.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <variant>

#include "sagnac/jones.hpp"

namespace sagnac {

namespace basis {
inline constexpr int HH = 0;
inline constexpr int HV = 1;
inline constexpr int VH = 2;
inline constexpr int VV = 3;
}  // namespace basis

/// Pure two-photon polarization state: 4 complex amplitudes over
/// (HH, HV, VH, VV), normalized on construction.
class BiphotonState {
 public:
  /// Normalizes the given amplitudes. Rejects near-zero input norm
  /// (< 1e-9) instead of silently rescaling.
  static BiphotonState from_amplitudes(const std::array<Complex, 4>& amp) {
    double n2 = 0.0;
    for (const auto& a : amp) {
      require_finite(a, "BiphotonState amplitude");
      n2 += std::norm(a);
    }
    const double n = std::sqrt(n2);
    if (n < 1e-9) {
      throw std::invalid_argument("BiphotonState: amplitude norm below 1e-9");
    }
    BiphotonState s;
    for (int k = 0; k < 4; ++k) s.amp_[k] = amp[k] / n;
    return s;
  }

  /// (|HV> - |VH>)/sqrt(2)
  static BiphotonState singlet() {
    const double r = 1.0 / std::sqrt(2.0);
    return from_amplitudes({Complex(0, 0), Complex(r, 0), Complex(-r, 0), Complex(0, 0)});
  }

  /// (|HV> + |VH>)/sqrt(2)
  static BiphotonState triplet() {
    const double r = 1.0 / std::sqrt(2.0);
    return from_amplitudes({Complex(0, 0), Complex(r, 0), Complex(r, 0), Complex(0, 0)});
  }

  /// (|HV> + e^{i phi} beta |VH>) / sqrt(1 + beta^2)
  static BiphotonState two_term(double beta, double phi) {
    require_finite(beta, "two_term.beta");
    require_finite(phi, "two_term.phi");
    if (beta < 0.0) throw std::invalid_argument("two_term: beta must be >= 0");
    return from_amplitudes(
        {Complex(0, 0), Complex(1, 0), std::polar(beta, phi), Complex(0, 0)});
  }

  Complex amp(int k) const { return amp_[k]; }
  const std::array<Complex, 4>& amplitudes() const { return amp_; }

  double norm_squared() const {
    double n2 = 0.0;
    for (const auto& a : amp_) n2 += std::norm(a);
    return n2;
  }

  Complex inner_product(const BiphotonState& other) const {
    Complex r(0, 0);
    for (int k = 0; k < 4; ++k) r += std::conj(amp_[k]) * other.amp_[k];
    return r;
  }

 private:
  BiphotonState() = default;
  std::array<Complex, 4> amp_{};
};

/// Mixed two-photon state: 4x4 density matrix in the (HH, HV, VH, VV)
/// basis. Hermitian, unit trace, positive semidefinite.
class DensityState {
 public:
  /// Validates Hermiticity (1e-12), trace 1 (1e-12) and eigenvalue
  /// positivity (>= -1e-10).
  static DensityState from_matrix(const std::array<Complex, 16>& rho) {
    DensityState d;
    d.rho_ = rho;
    d.validate();
    return d;
  }

  /// Rank-1 density matrix |psi><psi| of a pure state.
  static DensityState pure(const BiphotonState& psi) {
    DensityState d;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        d.rho_[4 * i + j] = psi.amp(i) * std::conj(psi.amp(j));
      }
    }
    return d;
  }

  Complex operator()(int row, int col) const { return rho_[4 * row + col]; }

  double trace_real() const {
    double t = 0.0;
    for (int i = 0; i < 4; ++i) t += rho_[5 * i].real();
    return t;
  }

  /// Smallest eigenvalue, from cyclic Jacobi sweeps on the 8x8 real
  /// symmetric embedding [[Re, -Im], [Im, Re]] of the Hermitian matrix.
  double min_eigenvalue() const {
    std::array<std::array<double, 8>, 8> a{};
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const Complex z = rho_[4 * i + j];
        a[i][j] = z.real();
        a[i + 4][j + 4] = z.real();
        a[i][j + 4] = -z.imag();
        a[i + 4][j] = z.imag();
      }
    }
    for (int sweep = 0; sweep < 50; ++sweep) {
      double off = 0.0;
      for (int p = 0; p < 8; ++p)
        for (int q = p + 1; q < 8; ++q) off += a[p][q] * a[p][q];
      if (off < 1e-30) break;
      for (int p = 0; p < 8; ++p) {
        for (int q = p + 1; q < 8; ++q) {
          if (std::abs(a[p][q]) < 1e-18) continue;
          const double theta = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
          const double c = std::cos(theta);
          const double s = std::sin(theta);
          for (int k = 0; k < 8; ++k) {
            const double akp = a[k][p];
            const double akq = a[k][q];
            a[k][p] = c * akp - s * akq;
            a[k][q] = s * akp + c * akq;
          }
          for (int k = 0; k < 8; ++k) {
            const double apk = a[p][k];
            const double aqk = a[q][k];
            a[p][k] = c * apk - s * aqk;
            a[q][k] = s * apk + c * aqk;
          }
        }
      }
    }
    double mn = a[0][0];
    for (int i = 1; i < 8; ++i) mn = std::min(mn, a[i][i]);
    return mn;
  }

  void validate() const {
    double herm = 0.0;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        require_finite(rho_[4 * i + j], "DensityState element");
        herm = std::max(herm, std::abs(rho_[4 * i + j] - std::conj(rho_[4 * j + i])));
      }
    }
    if (herm > 1e-12) throw std::invalid_argument("DensityState: not Hermitian");
    if (std::abs(trace_real() - 1.0) > 1e-9) {
      throw std::invalid_argument("DensityState: trace != 1");
    }
    if (min_eigenvalue() < -1e-10) {
      throw std::invalid_argument("DensityState: negative eigenvalue");
    }
  }

 private:
  DensityState() = default;
  std::array<Complex, 16> rho_{};
};

/// Either representation of the source output state.
using MeasurableState = std::variant<BiphotonState, DensityState>;

namespace detail {

inline void require_normalized(const BiphotonState& s) {
  if (std::abs(s.norm_squared() - 1.0) > 1e-9) {
    throw std::invalid_argument("joint_probability: state not normalized");
  }
}

inline void require_normalized(const DensityState& s) {
  if (std::abs(s.trace_real() - 1.0) > 1e-9) {
    throw std::invalid_argument("joint_probability: density trace != 1");
  }
}

inline double clamp01(double p) { return std::min(1.0, std::max(0.0, p)); }

}  // namespace detail

/// P(theta1, theta2) = |<theta1, theta2 | psi>|^2 for linear analyzers
/// at theta1 (signal) and theta2 (idler).
inline double joint_probability(const BiphotonState& state, double theta1, double theta2) {
  require_finite(theta1, "joint_probability.theta1");
  require_finite(theta2, "joint_probability.theta2");
  detail::require_normalized(state);
  const double u[2] = {std::cos(theta1), std::sin(theta1)};
  const double v[2] = {std::cos(theta2), std::sin(theta2)};
  Complex a(0, 0);
  for (int s = 0; s < 2; ++s) {
    for (int i = 0; i < 2; ++i) a += u[s] * v[i] * state.amp(2 * s + i);
  }
  return detail::clamp01(std::norm(a));
}

/// Tr[(P(theta1) x P(theta2)) rho] for a mixed state.
inline double joint_probability(const DensityState& state, double theta1, double theta2) {
  require_finite(theta1, "joint_probability.theta1");
  require_finite(theta2, "joint_probability.theta2");
  detail::require_normalized(state);
  const double u[2] = {std::cos(theta1), std::sin(theta1)};
  const double v[2] = {std::cos(theta2), std::sin(theta2)};
  // rank-1 projectors: Tr[(P1 x P2) rho] = <t1 t2| rho |t1 t2>
  Complex p(0, 0);
  for (int s = 0; s < 2; ++s) {
    for (int i = 0; i < 2; ++i) {
      for (int sp = 0; sp < 2; ++sp) {
        for (int ip = 0; ip < 2; ++ip) {
          p += u[s] * v[i] * state(2 * s + i, 2 * sp + ip) * u[sp] * v[ip];
        }
      }
    }
  }
  return detail::clamp01(p.real());
}

inline double joint_probability(const MeasurableState& state, double theta1, double theta2) {
  return std::visit([&](const auto& s) { return joint_probability(s, theta1, theta2); },
                    state);
}

/// Single-arm marginal Tr[(P(theta) x I) rho] for arm 1, or
/// Tr[(I x P(theta)) rho] for arm 2.
inline double marginal_probability(const BiphotonState& state, int arm, double theta) {
  require_finite(theta, "marginal_probability.theta");
  detail::require_normalized(state);
  const double u[2] = {std::cos(theta), std::sin(theta)};
  double p = 0.0;
  for (int other = 0; other < 2; ++other) {
    Complex a(0, 0);
    for (int proj = 0; proj < 2; ++proj) {
      const int idx = (arm == 1) ? 2 * proj + other : 2 * other + proj;
      a += u[proj] * state.amp(idx);
    }
    p += std::norm(a);
  }
  return detail::clamp01(p);
}

inline double marginal_probability(const DensityState& state, int arm, double theta) {
  require_finite(theta, "marginal_probability.theta");
  detail::require_normalized(state);
  const double u[2] = {std::cos(theta), std::sin(theta)};
  Complex p(0, 0);
  for (int other = 0; other < 2; ++other) {
    for (int proj = 0; proj < 2; ++proj) {
      for (int projp = 0; projp < 2; ++projp) {
        const int row = (arm == 1) ? 2 * proj + other : 2 * other + proj;
        const int col = (arm == 1) ? 2 * projp + other : 2 * other + projp;
        p += u[proj] * u[projp] * state(row, col);
      }
    }
  }
  return detail::clamp01(p.real());
}

inline double marginal_probability(const MeasurableState& state, int arm, double theta) {
  return std::visit(
      [&](const auto& s) { return marginal_probability(s, arm, theta); }, state);
}

/// Polarization-correlation expectation value: outcomes +1/-1 at each
/// analyzer, E = P(++) + P(--) - P(+-) - P(-+).
inline double expectation_value(const MeasurableState& state, double theta1, double theta2) {
  const double pp = joint_probability(state, theta1, theta2);
  const double pm = joint_probability(state, theta1, theta2 + pi / 2.0);
  const double mp = joint_probability(state, theta1 + pi / 2.0, theta2);
  const double mm = joint_probability(state, theta1 + pi / 2.0, theta2 + pi / 2.0);
  return pp + mm - pm - mp;
}

/// |<a|b>|^2. Equals 1 iff the states differ only by a global phase.
inline double fidelity(const BiphotonState& a, const BiphotonState& b) {
  detail::require_normalized(a);
  detail::require_normalized(b);
  return detail::clamp01(std::norm(a.inner_product(b)));
}

}  // namespace sagnac
