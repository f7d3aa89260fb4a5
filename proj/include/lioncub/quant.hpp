// SPDX-License-Identifier: Apache-2.0

// L_p quantization of update vectors, stochastic rounding and sign policies.
//
// The L_p quantizer normalizes by the mean p-norm
//
//   M_p(x) = (1/d * sum_j |x_j|^p)^(1/p)
//
// and maps x_i to clamp(round(L / (2 M_p(x)) * x_i), L) with L = 2^(n-1) - 1.
// p = infinity selects the max-normalized quantizer sround(L / |x|_inf * x_i)
// which uses stochastic rounding instead. Because M_p is far smaller than the
// max norm for heavy-tailed inputs, a few outliers saturate at +-L instead of
// pushing every other coordinate to zero.

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lioncub/rng.hpp"

namespace lioncub {

inline constexpr double kInfNorm = std::numeric_limits<double>::infinity();

// Mean p-norm M_p(x). p = kInfNorm gives max |x_j|; p = 0 gives the p->0
// limit, the geometric mean of the nonzero |x_j| (0 if every entry is 0).
// Throws DomainError for an empty vector or negative p.
double lp_mean_norm(std::span<const double> x, double p);

// Rounds v down with probability ceil(v) - v, otherwise up. E[sround(v)] = v.
std::int64_t sround(double v, Rng& rng);

enum class Rounding { kNearestEven, kStochastic };

struct QuantSpec {
  // Output levels span [-(2^(bits-1) - 1), 2^(bits-1) - 1]. bits = 1 means
  // the sign quantizer (levels {-1, +1}, zeros resolved by a SignPolicy).
  int bits = 8;
  double norm_p = 1.0;
  Rounding rounding = Rounding::kNearestEven;
  // Quantize sign(x) * ln(1 + |x| / M_1(x)) instead of x.
  bool log_transform = false;
  // Coordinates that round to 0 while x_i != 0 become sign(x_i).
  bool no_zero = false;

  // Largest representable level, 2^(bits-1) - 1.
  std::int32_t max_level() const;

  void validate() const;

  // Mean-norm quantizer with deterministic rounding.
  static QuantSpec lp(int bits, double p);
  // Max-norm quantizer with stochastic rounding.
  static QuantSpec linf(int bits);
  static QuantSpec sign();

  std::string describe() const;
};

enum class SignMode { kExactTernary, kAlternating };

struct SignPolicy {
  SignMode mode = SignMode::kAlternating;
  std::uint64_t iteration = 0;

  static SignPolicy ternary() { return {SignMode::kExactTernary, 0}; }
  static SignPolicy alternating(std::uint64_t t) {
    return {SignMode::kAlternating, t};
  }

  // Value assigned to an exact zero: 0, or +1 on odd / -1 on even iterations.
  std::int32_t zero_value() const {
    if (mode == SignMode::kExactTernary) return 0;
    return (iteration % 2 == 1) ? 1 : -1;
  }
};

std::vector<std::int32_t> apply_sign(std::span<const double> x,
                                     const SignPolicy& policy);
std::vector<std::int32_t> apply_sign(std::span<const std::int32_t> x,
                                     const SignPolicy& policy);

struct QuantizedVector {
  std::vector<std::int32_t> levels;
  // Real value of one level in the (possibly log-transformed) domain.
  double step = 0.0;
  // Scale s of the log transform, 0 when it was not applied.
  double log_scale = 0.0;
};

// Quantizes x per spec. The sign quantizer (bits = 1) resolves zeros with
// `policy`; other quantizers ignore it. `rng` feeds stochastic rounding.
QuantizedVector quantize(std::span<const double> x, const QuantSpec& spec,
                         Rng& rng,
                         const SignPolicy& policy = SignPolicy::ternary());

// Approximate inverse of quantize (undoes the scale and the log transform).
std::vector<double> dequantize(const QuantizedVector& q);

}  // namespace lioncub
