#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace trustgrid {

// Deterministic random source. All draws are derived from the raw mt19937_64
// stream with fixed arithmetic, so sequences are reproducible across
// platforms and standard library implementations (std::*_distribution is
// implementation-defined and deliberately avoided).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be > 0.
  int uniform_int(int n) {
    const auto r = static_cast<unsigned __int128>(gen_());
    return static_cast<int>((r * static_cast<unsigned __int128>(n)) >> 64);
  }

  // Standard normal via Box-Muller (cosine branch only).
  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Derives an independent child seed; advances this stream by one draw.
  std::uint64_t split() { return gen_() ^ 0x9e3779b97f4a7c15ULL; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace trustgrid
