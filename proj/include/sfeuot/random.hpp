#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace sfeuot {

// The engine is fully specified by the standard; the distributions below are
// written out so sampled streams are identical across standard libraries.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Marsaglia polar method; the second variate is discarded so the function is
// stateless.
inline double standard_normal(Rng& rng) {
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

inline void fill_normal(Rng& rng, std::span<double> out) {
  for (double& v : out) v = standard_normal(rng);
}

inline void fill_rademacher(Rng& rng, std::span<double> out) {
  std::uint64_t bits = 0;
  int left = 0;
  for (double& v : out) {
    if (left == 0) {
      bits = rng();
      left = 64;
    }
    v = (bits & 1u) ? 1.0 : -1.0;
    bits >>= 1;
    --left;
  }
}

// Index in [0, n) with negligible modulo bias for the n used here.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

}  // namespace sfeuot
