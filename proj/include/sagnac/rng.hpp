// rng.hpp
// Deterministic random streams for reproducible simulations.
// xoshiro256++ generators seeded through splitmix64, with a stable
// (master seed, stream index) derivation contract so records can be
// sampled in any order, or concurrently, with identical results.
// Poisson sampling is implemented here rather than taken from
// <random> so that outputs are bit-identical across standard-library
// implementations.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "sagnac/jones.hpp"  // pi

namespace sagnac {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Stable mixing of a master seed with a stream index.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master;
  (void)detail::splitmix64(s);
  s ^= 0x9e3779b97f4a7c15ULL * (stream + 1);
  return detail::splitmix64(s);
}

/// xoshiro256++ PRNG.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = detail::splitmix64(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal variate (Box-Muller, no caching).
  double gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
  }

 private:
  std::array<std::uint64_t, 4> state_{};
};

/// Derive the stream for one sampled record. Two-level contract:
/// derive_stream(derive_stream-seed(master, scan), point).
inline Rng derive_stream(std::uint64_t master, std::uint64_t stream) {
  return Rng(mix_seed(master, stream));
}

/// Poisson variate with the given mean. Exact sampling: multiplication
/// method below mean 12, tan-based rejection (Cauchy envelope, as in
/// the classic poidev routine) above.
inline std::int64_t sample_poisson(Rng& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  if (mean < 12.0) {
    const double g = std::exp(-mean);
    std::int64_t k = -1;
    double t = 1.0;
    do {
      ++k;
      t *= rng.uniform();
    } while (t > g);
    return k;
  }
  const double sq = std::sqrt(2.0 * mean);
  const double log_mean = std::log(mean);
  const double g = mean * log_mean - std::lgamma(mean + 1.0);
  double em = 0.0;
  double t = 0.0;
  do {
    double y = 0.0;
    do {
      y = std::tan(pi * rng.uniform());
      em = sq * y + mean;
    } while (em < 0.0);
    em = std::floor(em);
    t = 0.9 * (1.0 + y * y) * std::exp(em * log_mean - std::lgamma(em + 1.0) - g);
  } while (rng.uniform() > t);
  return static_cast<std::int64_t>(em);
}

}  // namespace sagnac
