#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cabm {

// Deterministic RNG. mt19937_64 output is fully specified by the standard;
// the distributions here are hand-rolled on top of the raw engine so streams
// are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int64_t uniform_int(int64_t n) {
    // modulo bias is < 2^-50 for any n used here
    return static_cast<int64_t>(eng_() % static_cast<uint64_t>(n));
  }

  // standard normal via Box-Muller
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // derive an independent stream, e.g. one per worker or per subinterval
  Rng fork(uint64_t salt) const {
    return Rng(mix(seed_base_ ^ salt));
  }

  static Rng seeded(uint64_t seed) {
    Rng r(mix(seed));
    r.seed_base_ = seed;
    return r;
  }

 private:
  static uint64_t mix(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 eng_;
  uint64_t seed_base_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cabm
