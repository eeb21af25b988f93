#pragma once
// Deterministic parallel random number streams and a fast standard-normal
// sampler for the simulation hot loops.
//
// Replica streams are derived from (base_seed, replica_id) by a SplitMix64
// mixing chain, so any replica's stream can be reconstructed independently
// of scheduling or worker count.

#include <cmath>
#include <cstdint>
#include <random>

namespace coupling {

// SplitMix64 finalizer step: advances `state` by the golden-ratio increment
// and returns a well-mixed 64-bit value.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derive the seed for one replica's private mt19937_64 stream.
// Distinct replica ids map to distinct pre-mix states (odd increment), and
// the double SplitMix64 mixing decorrelates consecutive ids.
inline std::uint64_t replica_seed(std::uint64_t base_seed, std::uint64_t replica_id) {
  std::uint64_t s = base_seed;
  std::uint64_t mixed_base = splitmix64_next(s);
  std::uint64_t t = mixed_base + 0x9E3779B97F4A7C15ULL * replica_id;
  return splitmix64_next(t);
}

inline std::mt19937_64 seed_for_replica(std::uint64_t base_seed, std::uint64_t replica_id) {
  return std::mt19937_64(replica_seed(base_seed, replica_id));
}

// 128-layer Ziggurat sampler for N(0,1).
//
// Table layout and rejection scheme follow the classic equal-area
// construction: x_[0] is the pseudo-width of the base strip (V / f(R)),
// x_[1] = R is the tail boundary, x_[128] = 0. A typical draw consumes one
// 64-bit value: low 7 bits select the layer, the top 53 bits give the
// signed horizontal coordinate. Wedge and tail cases draw extra uniforms.
// Everything is plain arithmetic on mt19937_64 output, so streams are
// platform-stable (unlike std::normal_distribution, whose sequence is
// implementation-defined).
class ZigguratNormal {
 public:
  ZigguratNormal() {
    constexpr double R = 3.442619855899;        // tail boundary
    constexpr double V = 9.91256303526217e-3;   // per-layer area
    double f = std::exp(-0.5 * R * R);
    x_[0] = V / f;
    x_[1] = R;
    x_[128] = 0.0;
    for (int i = 2; i < 128; ++i) {
      x_[i] = std::sqrt(-2.0 * std::log(V / x_[i - 1] + f));
      f = std::exp(-0.5 * x_[i] * x_[i]);
    }
    for (int i = 0; i < 128; ++i) ratio_[i] = x_[i + 1] / x_[i];
  }

  double operator()(std::mt19937_64& rng) const {
    constexpr double R = 3.442619855899;
    for (;;) {
      const std::uint64_t w = rng();
      const int i = static_cast<int>(w & 127u);
      // Uniform in (-1, 1), offset to avoid hitting the endpoints exactly.
      const double u =
          2.0 * ((static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53) - 1.0;
      if (std::abs(u) < ratio_[i]) return u * x_[i];
      if (i == 0) return tail_sample(rng, R, u < 0.0);
      const double x = u * x_[i];
      const double f0 = std::exp(-0.5 * (x_[i] * x_[i] - x * x));
      const double f1 = std::exp(-0.5 * (x_[i + 1] * x_[i + 1] - x * x));
      if (f1 + uniform01(rng) * (f0 - f1) < 1.0) return x;
    }
  }

  static double uniform01(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  static double tail_sample(std::mt19937_64& rng, double r, bool negative) {
    double x, y;
    do {
      x = std::log(uniform01(rng)) / r;
      y = std::log(uniform01(rng));
    } while (-2.0 * y < x * x);
    return negative ? x - r : r - x;
  }

  double x_[129];
  double ratio_[128];
};

// Shared immutable instance (tables are read-only after construction).
inline const ZigguratNormal& ziggurat() {
  static const ZigguratNormal z;
  return z;
}

}  // namespace coupling
