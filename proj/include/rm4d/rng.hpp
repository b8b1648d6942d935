#pragma once

#include <cstdint>

#include "rm4d/geometry.hpp"

namespace rm4d {

/// splitmix64, used for seed expansion and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256** generator. Hand-rolled so sampled sequences are identical
/// across platforms and standard library versions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  /// Independent generator for a (seed, stream) pair. Streams with distinct
  /// ids are decorrelated; used for per-batch and per-worker sampling.
  static Rng for_stream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t sm = seed ^ (0x632be59bd9b4e019ULL * (stream + 1));
    return Rng(splitmix64(sm));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi). Degenerate interval returns lo.
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

  /// Uniform unit quaternion (uniform distribution on SO(3)).
  Eigen::Quaterniond unit_quaternion() {
    Eigen::Vector4d v;
    double n2 = 0.0;
    do {
      v << normal(), normal(), normal(), normal();
      n2 = v.squaredNorm();
    } while (n2 < 1e-12);
    v /= std::sqrt(n2);
    return Eigen::Quaterniond(v[0], v[1], v[2], v[3]);
  }

  Mat3 random_rotation() { return unit_quaternion().toRotationMatrix(); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace rm4d
