#pragma once

// Portable seedable randomness. PCG32 (XSH-RR, 64-bit state) is used so that
// sequences are reproducible across compilers and standard libraries; none of
// the <random> distributions are used because their outputs are
// implementation-defined.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace avsim::rng {

/// Stream ids, one per concern, so that adding draws to one concern never
/// shifts another.
enum class Stream : std::uint64_t {
  kDemand = 1,
  kDetector = 2,
  kScenario = 3,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Order-sensitive seed derivation, e.g. derive_seed(base, frame_id).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                    std::uint64_t b = 0) noexcept {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ b);
}

class Pcg32 {
 public:
  Pcg32(std::uint64_t seed, Stream stream) : Pcg32(seed, static_cast<std::uint64_t>(stream)) {}

  Pcg32(std::uint64_t seed, std::uint64_t stream) : inc_((stream << 1U) | 1U) {
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() noexcept {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18U) ^ old) >> 27U);
    const auto rot = static_cast<std::uint32_t>(old >> 59U);
    return (xorshifted >> rot) | (xorshifted << ((~rot + 1U) & 31U));
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    const std::uint64_t hi = next_u32() >> 5U;
    const std::uint64_t lo = next_u32() >> 6U;
    return (static_cast<double>(hi) * 67108864.0 + static_cast<double>(lo)) /
           9007199254740992.0;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint32_t bounded(std::uint32_t bound) noexcept {
    const std::uint32_t threshold = (~bound + 1U) % bound;
    for (;;) {
      const std::uint32_t r = next_u32();
      if (r >= threshold) return r % bound;
    }
  }

  /// Standard normal, Box-Muller (one value per call, two uniforms consumed).
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  /// Knuth's multiplicative method; intended for the small rates used here.
  int poisson(double lambda) noexcept {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_;
};

inline double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double standard_normal_quantile(double p) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// Normal(mean, stddev) restricted to [lo, hi], sampled by inverse CDF with a
/// single uniform draw. The upper tail is handled by reflection to keep
/// precision when both bounds sit far above the mean.
inline double truncated_normal(Pcg32& gen, double mean, double stddev, double lo,
                               double hi) {
  const double u = gen.uniform();
  if (stddev <= 0.0 || hi <= lo) return std::clamp(mean, lo, hi);
  double alpha = (lo - mean) / stddev;
  double beta = (hi - mean) / stddev;
  const bool reflect = alpha > 0.0;
  if (reflect) {
    const double a = -beta;
    beta = -alpha;
    alpha = a;
  }
  const double c_lo = standard_normal_cdf(alpha);
  const double c_hi = standard_normal_cdf(beta);
  double z = beta;
  if (c_hi > c_lo) {
    const double p = c_lo + u * (c_hi - c_lo);
    if (p > 0.0 && p < 1.0) z = std::clamp(standard_normal_quantile(p), alpha, beta);
  }
  if (reflect) z = -z;
  return std::clamp(mean + stddev * z, lo, hi);
}

}  // namespace avsim::rng
