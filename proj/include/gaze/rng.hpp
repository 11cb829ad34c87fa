#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gaze {

// Deterministic RNG utilities. The mt19937_64 core is fully specified by the
// standard; the transforms below are ours, so a (seed, call sequence) pair
// produces identical values on every platform. std::uniform_* distributions
// are implementation-defined and must not be used anywhere results are
// promised to be reproducible.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Chains a stream index into a base seed; used to derive independent
// deterministic streams (init, shuffle, dropout, ...) from one user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1), 53-bit resolution.
  double next_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound); bound >= 1. Rejection-free modulo is fine
  // for our uses (shuffles, jitter), bias is < 2^-53 of a pixel.
  std::uint64_t next_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(next_unit() * static_cast<double>(bound));
  }

  double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Marsaglia polar method; consumes a variable number of draws but the
  // sequence is still fully determined by the seed.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_unit() - 1.0;
      v = 2.0 * next_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gaze
