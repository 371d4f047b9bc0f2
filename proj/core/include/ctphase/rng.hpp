#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ctphase {

// SplitMix64 finalizer, used to derive uncorrelated per-index streams
// from a (seed, index) pair.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Deterministic random stream built on std::mt19937_64, which the
/// standard specifies bit-exactly. std::shuffle and
/// std::normal_distribution are implementation-defined, so the shuffle
/// and gaussian below are spelled out explicitly; the exact draw sequence
/// is part of the reproducibility contract for seeded outputs.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  static RandomStream for_index(std::uint64_t seed, std::uint64_t index) {
    return RandomStream(splitmix64(seed ^ splitmix64(index + 1)));
  }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1), 53 random bits.
  double next_unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Standard normal via Box-Muller, one value per call (two uniforms).
  double gaussian() {
    constexpr double two_pi = 6.283185307179586476925286766559;
    double u1 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  /// Fisher-Yates with j = next_u64() % (i + 1).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_u64() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace ctphase
