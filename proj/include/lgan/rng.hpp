#ifndef LGAN_RNG_HPP
#define LGAN_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace lgan {

/// Seeded random source with fully specified draw arithmetic, so that runs
/// reproduce bit-for-bit regardless of standard-library distribution
/// internals. All randomness in the library flows through one of these,
/// passed explicitly.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1), 53 usable bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller, one value per two engine draws.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n). Rejection sampling, unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t max = std::mt19937_64::max();
    const std::uint64_t threshold = max - max % n;
    for (;;) {
      std::uint64_t x = engine_();
      if (x < threshold) return x % n;
    }
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace lgan

#endif
