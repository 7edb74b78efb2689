// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "hadiff/types.hpp"

namespace hadiff {

/// Deterministic random stream. Wraps std::mt19937_64 with hand-rolled
/// transforms so that draws are bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  /// Independent substream; stable under reordering of other draws.
  Rng fork(std::uint64_t stream) const {
    std::uint64_t s = seed_mix(base_seed_, stream);
    return Rng(s);
  }

  static Rng seeded(std::uint64_t seed) {
    Rng r(seed);
    r.base_seed_ = seed;
    return r;
  }

  double uniform() {
    // 53-bit mantissa in [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Vec3 normal3() { return Vec3(normal(), normal(), normal()); }

  /// Uniform point on the unit sphere.
  Vec3 unit_vector() {
    Vec3 v;
    double n2 = 0.0;
    do {
      v = normal3();
      n2 = v.squaredNorm();
    } while (n2 < 1e-24);
    return v / std::sqrt(n2);
  }

  std::uint64_t bits() { return gen_(); }

 private:
  explicit Rng(std::uint64_t seed, int) : gen_(seed) {}

  static std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 over the pair
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 gen_;
  std::uint64_t base_seed_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace hadiff
