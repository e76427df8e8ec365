#pragma once

// Deterministic random number generation.
//
// std::mt19937_64 has standard-specified output, but the std:: distributions
// are implementation-defined, so every distribution here is hand-rolled to
// keep runs bit-reproducible across compilers and platforms.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace ratenet {

// SplitMix64 step; used to whiten seeds and to derive independent substreams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter construction: substream `counter` of a base seed. Used for
// per-trial, per-time-step, and per-purpose seed derivation so that replay
// never depends on evaluation order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t counter) {
  return splitmix64(base ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t u64() { return engine_(); }

  // Uniform on [0,1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1); rejects the (probability 2^-53) exact zero so callers
  // can take logs.
  double uniform01_open() {
    double u;
    do {
      u = uniform01();
    } while (u == 0.0);
    return u;
  }

  // Standard normal via Box-Muller (cosine branch only; one draw per call,
  // two uniforms consumed, no hidden cache state).
  double normal() {
    const double u1 = uniform01_open();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Gamma(shape, scale) by Marsaglia-Tsang squeeze rejection; valid for any
  // shape > 0 (the shape < 1 case boosts a shape+1 draw by u^(1/shape)).
  double gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
      throw std::invalid_argument("gamma: shape and scale must be positive");
    if (shape < 1.0) {
      const double boost = std::pow(uniform01_open(), 1.0 / shape);
      return gamma(shape + 1.0, scale) * boost;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform01_open();
      if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v * scale;
    }
  }

  // Poisson(lambda) by Knuth's product method. Large rates are split in half
  // recursively (Poisson additivity) so exp(-lambda) never underflows.
  std::int64_t poisson(double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("poisson: lambda < 0");
    if (lambda > 30.0) return poisson(lambda / 2.0) + poisson(lambda / 2.0);
    const double limit = std::exp(-lambda);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform01();
    } while (p > limit);
    return k - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ratenet
