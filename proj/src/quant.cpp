// SPDX-License-Identifier: Apache-2.0

#include "lioncub/quant.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lioncub/errors.hpp"

namespace lioncub {

double lp_mean_norm(std::span<const double> x, double p) {
  if (x.empty()) throw DomainError("lp_mean_norm: empty vector");
  if (!(p >= 0.0)) throw DomainError("lp_mean_norm: norm order must be >= 0");

  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
  }
  if (p == 0.0) {
    // Geometric mean over nonzero entries, in log space.
    double log_sum = 0.0;
    std::size_t nonzero = 0;
    for (double v : x) {
      if (v != 0.0) {
        log_sum += std::log(std::abs(v));
        ++nonzero;
      }
    }
    return nonzero == 0 ? 0.0 : std::exp(log_sum / static_cast<double>(nonzero));
  }
  if (p == 1.0) {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return s / static_cast<double>(x.size());
  }
  // Factor out the max so |x|^p neither overflows nor underflows.
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (double v : x) s += std::pow(std::abs(v) / m, p);
  return m * std::pow(s / static_cast<double>(x.size()), 1.0 / p);
}

std::int64_t sround(double v, Rng& rng) {
  const double lo = std::floor(v);
  const double frac = v - lo;
  const auto base = static_cast<std::int64_t>(lo);
  if (frac == 0.0) return base;
  return rng.uniform() < frac ? base + 1 : base;
}

std::int32_t QuantSpec::max_level() const {
  return static_cast<std::int32_t>((std::int64_t{1} << (bits - 1)) - 1);
}

void QuantSpec::validate() const {
  if (bits < 1 || bits > 16) {
    throw ConfigError("quant: bits must be in [1, 16], got " +
                      std::to_string(bits));
  }
  if (!(norm_p >= 0.0)) throw ConfigError("quant: norm_p must be >= 0");
}

QuantSpec QuantSpec::lp(int bits, double p) {
  QuantSpec s;
  s.bits = bits;
  s.norm_p = p;
  s.rounding = std::isinf(p) ? Rounding::kStochastic : Rounding::kNearestEven;
  return s;
}

QuantSpec QuantSpec::linf(int bits) { return lp(bits, kInfNorm); }

QuantSpec QuantSpec::sign() {
  QuantSpec s;
  s.bits = 1;
  s.norm_p = kInfNorm;
  return s;
}

std::string QuantSpec::describe() const {
  if (bits == 1) return "sign";
  std::ostringstream os;
  os << "Q_";
  if (std::isinf(norm_p)) {
    os << "inf";
  } else {
    os << norm_p;
  }
  os << "/" << bits << "bit";
  if (rounding == Rounding::kStochastic) os << "/sround";
  if (log_transform) os << "/log";
  if (no_zero) os << "/nozero";
  return os.str();
}

namespace {

template <typename T>
std::vector<std::int32_t> sign_impl(std::span<const T> x,
                                    const SignPolicy& policy) {
  std::vector<std::int32_t> out(x.size());
  const std::int32_t z = policy.zero_value();
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] > 0 ? 1 : (x[i] < 0 ? -1 : z);
  }
  return out;
}

}  // namespace

std::vector<std::int32_t> apply_sign(std::span<const double> x,
                                     const SignPolicy& policy) {
  return sign_impl(x, policy);
}

std::vector<std::int32_t> apply_sign(std::span<const std::int32_t> x,
                                     const SignPolicy& policy) {
  return sign_impl(x, policy);
}

QuantizedVector quantize(std::span<const double> x, const QuantSpec& spec,
                         Rng& rng, const SignPolicy& policy) {
  spec.validate();
  if (x.empty()) throw DomainError("quantize: empty vector");

  QuantizedVector out;
  out.levels.assign(x.size(), 0);

  std::vector<double> transformed;
  std::span<const double> input = x;
  if (spec.log_transform) {
    const double s = lp_mean_norm(x, 1.0);
    if (s == 0.0) return out;
    transformed.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      transformed[i] = std::copysign(std::log1p(std::abs(x[i]) / s), x[i]);
    }
    out.log_scale = s;
    input = transformed;
  }

  if (spec.bits == 1) {
    out.levels = apply_sign(input, policy);
    out.step = lp_mean_norm(input, 1.0);
    return out;
  }

  const double norm = lp_mean_norm(input, spec.norm_p);
  if (norm == 0.0) return out;

  const std::int32_t limit = spec.max_level();
  const bool max_normalized = std::isinf(spec.norm_p);
  // Max normalization maps onto [-L, L] directly; L_p normalization uses L/2M.
  const double scale = max_normalized ? limit / norm : limit / (2.0 * norm);
  out.step = 1.0 / scale;

  for (std::size_t i = 0; i < input.size(); ++i) {
    const double v = scale * input[i];
    std::int64_t q = spec.rounding == Rounding::kStochastic
                         ? sround(v, rng)
                         : static_cast<std::int64_t>(std::nearbyint(v));
    q = std::clamp<std::int64_t>(q, -limit, limit);
    if (spec.no_zero && q == 0 && input[i] != 0.0) q = input[i] > 0 ? 1 : -1;
    out.levels[i] = static_cast<std::int32_t>(q);
  }
  return out;
}

std::vector<double> dequantize(const QuantizedVector& q) {
  std::vector<double> out(q.levels.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double y = q.levels[i] * q.step;
    out[i] = q.log_scale > 0.0
                 ? std::copysign(q.log_scale * std::expm1(std::abs(y)), y)
                 : y;
  }
  return out;
}

}  // namespace lioncub
