#pragma once

#include <cstdint>
#include <random>

namespace subcart {

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic stream keyed by (seed, stage, draw). Uniform variates are
/// produced from raw 64-bit output so results do not depend on the
/// standard library's distribution implementations.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stage = 0, std::uint64_t draw = 0)
      : engine_(mix_seed(mix_seed(mix_seed(seed) ^ stage) ^ draw)) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (lo, hi).
  double uniform(double lo, double hi) {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return lo + (hi - lo) * u;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace subcart
