#pragma once

#include <cmath>
#include <cstdint>

namespace park {

// Counter-based generator (splitmix64). State is a single word, so streams
// can be derived by key without sharing mutable state; the same (seed, key)
// pair always yields the same stream on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  static Rng keyed(uint64_t seed, uint64_t key) {
    Rng r(seed ^ (0x9e3779b97f4a7c15ULL * (key + 1)));
    r.next_u64();
    return r;
  }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [0, n)
  uint64_t below(uint64_t n) { return next_u64() % n; }

  // standard normal via Box-Muller (cached second value discarded to keep
  // the stream position independent of call pattern)
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool chance(double p) { return uniform() < p; }

 private:
  uint64_t state_;
};

}  // namespace park
