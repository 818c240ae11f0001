#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

// Deterministic random generation for all simulation code.
//
// Every stochastic component draws from an Rng seeded through
// derive_seed(master, name[, index]), so a single master seed fixes the whole
// run and independent sub-processes (emitter, background, detector, scan rows,
// ...) can be reseeded without disturbing each other.  xoshiro256** state is
// expanded from the 64-bit seed with splitmix64.

namespace wsim {

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// 64-bit FNV-1a over the stream name.
constexpr std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
  std::uint64_t s = master ^ hash_name(stream);
  return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t index) {
  std::uint64_t s = master ^ hash_name(stream);
  s = splitmix64(s);
  s ^= index * 0x9E3779B97F4A7C15ull;
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform double in (lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t t = -n % n;
      while (lo < t) {
        x = next();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Exponential waiting time with the given rate (events per unit time).
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  /// Standard normal via the polar method; one spare cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double x, y, s;
    do {
      x = 2.0 * uniform() - 1.0;
      y = 2.0 * uniform() - 1.0;
      s = x * x + y * y;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = y * m;
    have_spare_ = true;
    return x * m;
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Poisson sample, exact for all means (chop-down below 10, PTRS above).
  std::int64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 10.0) return poisson_small(mean);
    return poisson_ptrs(mean);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::int64_t poisson_small(double mean) {
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  // Hormann's transformed rejection with squeeze (PTRS).
  std::int64_t poisson_ptrs(double mean) {
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    while (true) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const auto k = static_cast<std::int64_t>(
          std::floor((2.0 * a / us + b) * u + mean + 0.43));
      if (us >= 0.07 && v <= vr) return k;
      if (k < 0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          -mean + k * loglam - std::lgamma(static_cast<double>(k) + 1.0))
        return k;
    }
  }

  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Poisson-sample each entry of a vector of expected counts.
inline std::vector<double> poisson_sample(std::span<const double> means, Rng& rng) {
  std::vector<double> out(means.size());
  for (std::size_t i = 0; i < means.size(); ++i)
    out[i] = static_cast<double>(rng.poisson(means[i]));
  return out;
}

}  // namespace wsim
