#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace autopinn {

/// Deterministic RNG used everywhere randomness is needed. Wraps mt19937_64
/// but draws uniforms/normals through fixed arithmetic instead of the
/// implementation-defined std distributions, so a (seed, call sequence) pair
/// yields the same stream on any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer uniform in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Modulo bias is < 2^-40 for the n used here (<= a few thousand).
    return engine_() % n;
  }

  /// Standard normal via Box-Muller (cached second draw).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

/// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace autopinn
