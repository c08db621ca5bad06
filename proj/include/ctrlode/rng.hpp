// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace ctrlode {

/// Seedable 64-bit generator used everywhere randomness is needed.
///
/// Draws come from mt19937_64 but the uniform mapping is done by hand
/// ((x >> 11) * 2^-53) so streams are bit-reproducible independent of the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Derives the seed of substream `stream` from a master seed.
  ///
  /// Multistart and profile generation draw from split(seed, k) so runs are
  /// reproducible regardless of how many draws each substream consumes.
  static std::uint64_t split(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer on (seed advanced by stream+1 increments).
    std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace ctrlode
