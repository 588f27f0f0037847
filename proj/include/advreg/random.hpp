#pragma once

// Seeded random helpers with a fixed mapping from engine output to values.
// The standard distributions are implementation-defined, so results would
// differ between standard libraries; these do not.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace advreg {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform on the open interval (lo, hi).
  double uniform_open(double lo, double hi) {
    double u = 0.0;
    do {
      u = uniform();
    } while (u == 0.0);
    return lo + (hi - lo) * u;
  }

  /// Uniform integer in [0, n); n must be positive.
  std::size_t index(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v = 0;
    do {
      v = engine_();
    } while (v >= limit);
    return static_cast<std::size_t>(v % bound);
  }

  /// Standard normal via Box-Muller.
  double normal();

  /// Fisher-Yates shuffle of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = index(i);
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

  /// k distinct indices from 0..n-1, uniformly without replacement.
  std::vector<std::size_t> sample(std::size_t n, std::size_t k) {
    auto p = permutation(n);
    p.resize(k);
    return p;
  }

 private:
  std::mt19937_64 engine_;
};

inline double Rng::normal() {
  const double u1 = uniform_open(0.0, 1.0);
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Derives an independent stream seed from a base seed and a tag.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace advreg
