// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <cmath>
#include <random>

namespace lioncub {

// Mixes a base seed with a list of keys into an independent 64-bit seed
// (splitmix64 finalizer chained over the keys).
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> keys);

// Seeded random stream. All randomness in the library is drawn from an
// explicit Rng so runs are reproducible from their seeds.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Stream keyed by (base, keys...); same key gives the same stream.
  static Rng keyed(std::uint64_t base,
                   std::initializer_list<std::uint64_t> keys) {
    return Rng(derive_seed(base, keys));
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on the open interval (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  double normal() { return normal_(engine_); }

  // Exponential(1).
  double exponential() { return -std::log(uniform_open()); }

  // Laplace(0, scale) by inverse CDF.
  double laplace(double scale) {
    const double u = uniform() - 0.5;
    const double mag = -std::log(1.0 - 2.0 * std::abs(u));
    return u < 0 ? -scale * mag : scale * mag;
  }

  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace lioncub
