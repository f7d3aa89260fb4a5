// SPDX-License-Identifier: Apache-2.0

#include "lioncub/workloads.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "lioncub/errors.hpp"

namespace lioncub {

void NoiseSpec::validate() const {
  if (!(levy_alpha > 0.0 && levy_alpha <= 2.0)) {
    throw ConfigError("levy_alpha must be in (0, 2]");
  }
  if (!(scale >= 0.0)) throw ConfigError("noise scale must be >= 0");
}

double sample_alpha_stable_one(double a, Rng& rng) {
  constexpr double kHalfPi = std::numbers::pi / 2.0;
  double u;
  do {
    u = (rng.uniform_open() - 0.5) * std::numbers::pi;
  } while (std::abs(u) >= kHalfPi);
  if (a == 1.0) return std::tan(u);
  const double w = rng.exponential();
  return std::sin(a * u) / std::pow(std::cos(u), 1.0 / a) *
         std::pow(std::cos((1.0 - a) * u) / w, (1.0 - a) / a);
}

std::vector<double> sample_alpha_stable(const NoiseSpec& spec,
                                        std::size_t count, Rng& rng) {
  spec.validate();
  std::vector<double> out(count);
  for (auto& v : out) v = spec.scale * sample_alpha_stable_one(spec.levy_alpha, rng);
  return out;
}

ParamSet noisy_client_grads(const ParamSet& clean, const NoiseSpec& spec,
                            std::uint64_t client, std::uint64_t t) {
  spec.validate();
  ParamSet out = clean;
  if (spec.scale == 0.0) return out;
  Rng rng = Rng::keyed(spec.seed, {client, t});
  for (auto& layer : out) {
    for (auto& v : layer.values) {
      v += spec.scale * sample_alpha_stable_one(spec.levy_alpha, rng);
    }
  }
  return out;
}

ParamSet make_mlp(const MlpDims& dims) {
  if (dims.in_dim == 0 || dims.hidden == 0 || dims.out_dim == 0) {
    throw ConfigError("MLP dimensions must be positive");
  }
  ParamSet p;
  p.add("input", {dims.hidden, dims.in_dim + 1});
  p.add("head", {dims.out_dim, dims.hidden + 1});
  return p;
}

ParamSet init_mlp(const MlpDims& dims, Rng& rng) {
  ParamSet p = make_mlp(dims);
  const double s_in = 1.0 / std::sqrt(static_cast<double>(dims.in_dim));
  const double s_head = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
  for (auto& v : p.at("input").values) v = s_in * rng.normal();
  for (auto& v : p.at("head").values) v = s_head * rng.normal();
  return p;
}

namespace {

struct Forward {
  std::vector<double> hidden;  // batch x hidden, post-tanh
  std::vector<double> output;  // batch x out_dim
};

Forward forward(const ParamSet& model, const MlpDims& dims,
                std::span<const double> x) {
  if (x.size() % dims.in_dim != 0) {
    throw ConfigError("MLP input size is not a multiple of in_dim");
  }
  const std::size_t batch = x.size() / dims.in_dim;
  const auto& w1 = model.at("input").values;
  const auto& w2 = model.at("head").values;
  const std::size_t r1 = dims.in_dim + 1;
  const std::size_t r2 = dims.hidden + 1;
  if (w1.size() != dims.hidden * r1 || w2.size() != dims.out_dim * r2) {
    throw ConfigError("MLP parameters do not match dimensions");
  }
  Forward f;
  f.hidden.resize(batch * dims.hidden);
  f.output.resize(batch * dims.out_dim);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x.data() + b * dims.in_dim;
    double* hb = f.hidden.data() + b * dims.hidden;
    for (std::size_t h = 0; h < dims.hidden; ++h) {
      const double* row = w1.data() + h * r1;
      double z = row[dims.in_dim];
      for (std::size_t i = 0; i < dims.in_dim; ++i) z += row[i] * xb[i];
      hb[h] = std::tanh(z);
    }
    for (std::size_t o = 0; o < dims.out_dim; ++o) {
      const double* row = w2.data() + o * r2;
      double y = row[dims.hidden];
      for (std::size_t h = 0; h < dims.hidden; ++h) y += row[h] * hb[h];
      f.output[b * dims.out_dim + o] = y;
    }
  }
  return f;
}

double mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw ConfigError("MLP target size does not match output size");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

}  // namespace

std::vector<double> mlp_forward(const ParamSet& model, const MlpDims& dims,
                                std::span<const double> inputs) {
  return forward(model, dims, inputs).output;
}

double mlp_loss(const ParamSet& model, const MlpDims& dims,
                std::span<const double> inputs,
                std::span<const double> targets) {
  return mse(forward(model, dims, inputs).output, targets);
}

LossAndGrad mlp_loss_and_grad(const ParamSet& model, const MlpDims& dims,
                              std::span<const double> inputs,
                              std::span<const double> targets) {
  const Forward f = forward(model, dims, inputs);
  LossAndGrad out;
  out.loss = mse(f.output, targets);
  out.grads = model.zeros_like();

  const std::size_t batch = inputs.size() / dims.in_dim;
  const std::size_t r1 = dims.in_dim + 1;
  const std::size_t r2 = dims.hidden + 1;
  const auto& w2 = model.at("head").values;
  auto& g1 = out.grads.at("input").values;
  auto& g2 = out.grads.at("head").values;
  const double norm = 2.0 / static_cast<double>(f.output.size());
  std::vector<double> dh(dims.hidden);

  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = inputs.data() + b * dims.in_dim;
    const double* hb = f.hidden.data() + b * dims.hidden;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t o = 0; o < dims.out_dim; ++o) {
      const std::size_t k = b * dims.out_dim + o;
      const double dy = norm * (f.output[k] - targets[k]);
      double* grow = g2.data() + o * r2;
      const double* wrow = w2.data() + o * r2;
      for (std::size_t h = 0; h < dims.hidden; ++h) {
        grow[h] += dy * hb[h];
        dh[h] += dy * wrow[h];
      }
      grow[dims.hidden] += dy;
    }
    for (std::size_t h = 0; h < dims.hidden; ++h) {
      const double dz = dh[h] * (1.0 - hb[h] * hb[h]);
      double* grow = g1.data() + h * r1;
      for (std::size_t i = 0; i < dims.in_dim; ++i) grow[i] += dz * xb[i];
      grow[dims.in_dim] += dz;
    }
  }
  return out;
}

LossAndGrad teacher_student_batch(const ParamSet& student,
                                  const ParamSet& teacher, const MlpDims& dims,
                                  std::size_t batch_size, Rng& rng) {
  std::vector<double> x(batch_size * dims.in_dim);
  for (auto& v : x) v = rng.normal();
  const auto y = mlp_forward(teacher, dims, x);
  return mlp_loss_and_grad(student, dims, x, y);
}

SynthDist parse_synth_dist(const std::string& name) {
  if (name == "laplace") return SynthDist::kLaplace;
  if (name == "gaussian") return SynthDist::kGaussian;
  if (name == "laplace_with_outliers") return SynthDist::kLaplaceWithOutliers;
  throw ConfigError("unknown distribution '" + name + "'");
}

std::string to_string(SynthDist d) {
  switch (d) {
    case SynthDist::kLaplace: return "laplace";
    case SynthDist::kGaussian: return "gaussian";
    case SynthDist::kLaplaceWithOutliers: return "laplace_with_outliers";
  }
  return "?";
}

std::vector<double> synth_update_vectors(const SynthSpec& spec, std::size_t d,
                                         Rng& rng) {
  if (d == 0) throw DomainError("synth_update_vectors: d must be >= 1");
  std::vector<double> x(d);
  if (spec.dist == SynthDist::kGaussian) {
    for (auto& v : x) v = spec.scale * rng.normal();
    return x;
  }
  for (auto& v : x) v = rng.laplace(spec.scale);
  if (spec.dist == SynthDist::kLaplaceWithOutliers) {
    const std::size_t k = std::min(spec.outliers, d);
    std::unordered_set<std::size_t> used;
    while (used.size() < k) {
      const std::size_t j = rng.next_u64() % d;
      if (!used.insert(j).second) continue;
      x[j] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * spec.ratio * spec.scale;
    }
  }
  return x;
}

}  // namespace lioncub
