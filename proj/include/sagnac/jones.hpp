// jones.hpp
// Single-photon polarization algebra in the {H, V} Jones basis:
// 2x2 complex operators, wave plates, and linear-polarizer projectors.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sagnac {

using Complex = std::complex<double>;

inline constexpr double pi = std::numbers::pi;

inline bool is_finite(Complex z) {
  return std::isfinite(z.real()) && std::isfinite(z.imag());
}

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument(std::string(what) + ": non-finite value");
  }
}

inline void require_finite(Complex z, const char* what) {
  if (!is_finite(z)) {
    throw std::invalid_argument(std::string(what) + ": non-finite value");
  }
}

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double x) {
  double y = std::fmod(x + pi, 2.0 * pi);
  if (y <= 0.0) y += 2.0 * pi;
  return y - pi;
}

/// Jones vector (amp_h, amp_v).
struct JonesVector {
  Complex h{0.0, 0.0};
  Complex v{0.0, 0.0};

  JonesVector() = default;
  JonesVector(Complex h_, Complex v_) : h(h_), v(v_) {
    require_finite(h, "JonesVector.h");
    require_finite(v, "JonesVector.v");
  }

  double power() const { return std::norm(h) + std::norm(v); }
};

/// 2x2 complex operator on one photon's polarization qubit, row-major
/// in the {H, V} basis.
class PolarizationOperator {
 public:
  PolarizationOperator() : m_{Complex(1, 0), Complex(0, 0), Complex(0, 0), Complex(1, 0)} {}

  PolarizationOperator(Complex m00, Complex m01, Complex m10, Complex m11)
      : m_{m00, m01, m10, m11} {
    for (const auto& e : m_) require_finite(e, "PolarizationOperator");
  }

  Complex operator()(int row, int col) const { return m_[2 * row + col]; }

  JonesVector apply(const JonesVector& in) const {
    return {m_[0] * in.h + m_[1] * in.v, m_[2] * in.h + m_[3] * in.v};
  }

  PolarizationOperator compose(const PolarizationOperator& rhs) const {
    // (*this) * rhs, applied right-to-left like matrix products
    const auto& a = m_;
    const auto& b = rhs.m_;
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
  }

  PolarizationOperator adjoint() const {
    return {std::conj(m_[0]), std::conj(m_[2]), std::conj(m_[1]), std::conj(m_[3])};
  }

  /// max-norm of (U^dag U - I); 0 for unitary operators.
  double unitarity_defect() const {
    PolarizationOperator g = adjoint().compose(*this);
    double d = 0.0;
    d = std::max(d, std::abs(g(0, 0) - Complex(1, 0)));
    d = std::max(d, std::abs(g(1, 1) - Complex(1, 0)));
    d = std::max(d, std::abs(g(0, 1)));
    d = std::max(d, std::abs(g(1, 0)));
    return d;
  }

  /// max-norm of (P^2 - P) plus (P - P^dag); 0 for Hermitian projectors.
  double projector_defect() const {
    PolarizationOperator p2 = compose(*this);
    double d = 0.0;
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        d = std::max(d, std::abs(p2(r, c) - (*this)(r, c)));
        d = std::max(d, std::abs((*this)(r, c) - std::conj((*this)(c, r))));
      }
    }
    return d;
  }

 private:
  std::array<Complex, 4> m_;  // row-major
};

/// Real rotation by `angle` in the H/V plane.
inline PolarizationOperator rotation(double angle) {
  require_finite(angle, "rotation.angle");
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {Complex(c, 0), Complex(-s, 0), Complex(s, 0), Complex(c, 0)};
}

/// General wave plate: R(axis) * diag(1, e^{i*retardance}) * R(-axis).
/// retardance = pi gives a half-wave plate, pi/2 a quarter-wave plate.
/// The slow-axis phase convention is fixed here once; probabilities are
/// independent of the choice.
inline PolarizationOperator waveplate(double retardance, double axis_angle) {
  require_finite(retardance, "waveplate.retardance");
  require_finite(axis_angle, "waveplate.axis_angle");
  const Complex ph = std::polar(1.0, retardance);
  const PolarizationOperator retarder(Complex(1, 0), Complex(0, 0), Complex(0, 0), ph);
  return rotation(axis_angle).compose(retarder).compose(rotation(-axis_angle));
}

inline PolarizationOperator half_wave_plate(double axis_angle) {
  return waveplate(pi, axis_angle);
}

inline PolarizationOperator quarter_wave_plate(double axis_angle) {
  return waveplate(pi / 2.0, axis_angle);
}

/// Rank-1 projector onto linear polarization at `angle` from H:
/// the outer product of (cos a, sin a) with itself.
inline PolarizationOperator projector(double angle) {
  require_finite(angle, "projector.angle");
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {Complex(c * c, 0), Complex(c * s, 0), Complex(c * s, 0), Complex(s * s, 0)};
}

}  // namespace sagnac
