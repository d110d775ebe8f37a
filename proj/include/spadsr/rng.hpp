#pragma once

#include <cmath>
#include <cstdint>

namespace spadsr {

// Counter-based random streams. Every stream is keyed by up to four 64-bit
// words; draws from one stream never depend on any other stream, so work can
// be split across threads in any order without changing results.

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t k1 = 0,
                        std::uint64_t k2 = 0, std::uint64_t k3 = 0) {
    // Two mixing rounds per key word keep distinct keys decorrelated.
    std::uint64_t s = seed;
    state_ = splitmix64(s);
    s ^= 0x6a09e667f3bcc909ull + k1;
    state_ ^= splitmix64(s);
    s ^= 0xbb67ae8584caa73bull + k2;
    state_ ^= splitmix64(s);
    s ^= 0x3c6ef372fe94f82bull + k3;
    state_ ^= splitmix64(s);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound), bound > 0. Rejection keeps it unbiased.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  /// Standard normal via Box-Muller (no caching; two uniforms per draw).
  double next_normal() {
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  /// Poisson-distributed count with the given mean.
  std::uint64_t next_poisson(double lambda) {
    if (!(lambda > 0.0)) return 0;
    if (lambda < 10.0) return poisson_knuth(lambda);
    return poisson_ptrs(lambda);
  }

 private:
  std::uint64_t poisson_knuth(double lambda) {
    const double limit = std::exp(-lambda);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= next_double();
    } while (p > limit);
    return k - 1;
  }

  // Hoermann's transformed rejection (PTRS), exact for large means.
  std::uint64_t poisson_ptrs(double lambda) {
    const double slam = std::sqrt(lambda);
    const double loglam = std::log(lambda);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = next_double() - 0.5;
      const double v = next_double();
      const double us = 0.5 - std::abs(u);
      const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          k * loglam - lambda - std::lgamma(k + 1.0)) {
        return static_cast<std::uint64_t>(k);
      }
    }
  }

  std::uint64_t state_;
};

}  // namespace spadsr
