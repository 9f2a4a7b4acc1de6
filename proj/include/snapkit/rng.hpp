#pragma once

#include <cmath>
#include <cstdint>

#include "snapkit/types.hpp"

namespace snapkit {

// splitmix64 generator. Hand-rolled so streams are bit-identical across
// platforms and standard-library versions (std::mt19937 distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

  // uniform on the disk |z| <= radius
  Complex uniform_disk(double radius) {
    double r = radius * std::sqrt(uniform());
    double phi = uniform(-kPi, kPi);
    return Complex(r * std::cos(phi), r * std::sin(phi));
  }

  // one draw from Binomial(n, p) by direct simulation (n is small everywhere we use it)
  int binomial(int n, double p) {
    int k = 0;
    for (int i = 0; i < n; ++i)
      if (uniform() < p) ++k;
    return k;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Deterministic sub-seed derivation for independent streams (restarts, sweep
// points, bootstrap resamples).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng mix(seed ^ (0xA5A5A5A5DEADBEEFull + stream * 0x9E3779B97F4A7C15ull));
  return mix.next_u64();
}

}  // namespace snapkit
