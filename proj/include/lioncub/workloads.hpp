// SPDX-License-Identifier: Apache-2.0

// Desk-scale training problems: a teacher-student tanh MLP whose per-client
// gradients carry symmetric alpha-stable noise, plus synthetic update vectors
// for quantizer studies.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lioncub/param_set.hpp"
#include "lioncub/rng.hpp"

namespace lioncub {

struct NoiseSpec {
  // Stability exponent in (0, 2]; 2 is Gaussian with variance 2 * scale^2.
  double levy_alpha = 2.0;
  double scale = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Symmetric alpha-stable samples by the Chambers-Mallows-Stuck transform.
std::vector<double> sample_alpha_stable(const NoiseSpec& spec,
                                        std::size_t count, Rng& rng);
double sample_alpha_stable_one(double levy_alpha, Rng& rng);

// g_i = clean + noise from the stream keyed by (spec.seed, client, t).
ParamSet noisy_client_grads(const ParamSet& clean, const NoiseSpec& spec,
                            std::uint64_t client, std::uint64_t t);

struct MlpDims {
  std::size_t in_dim = 16;
  std::size_t hidden = 32;
  std::size_t out_dim = 1;
};

// Layers "input" (hidden x (in_dim + 1)) and "head" (out_dim x (hidden + 1)).
// Each row holds the weights followed by the bias.
ParamSet make_mlp(const MlpDims& dims);
// Weights and biases drawn from N(0, 1 / fan_in).
ParamSet init_mlp(const MlpDims& dims, Rng& rng);

// Forward pass for a row-major batch of inputs (batch x in_dim).
std::vector<double> mlp_forward(const ParamSet& model, const MlpDims& dims,
                                std::span<const double> inputs);

struct LossAndGrad {
  double loss = 0.0;
  ParamSet grads;
};

// Mean squared error over batch and outputs, with analytic gradients.
LossAndGrad mlp_loss_and_grad(const ParamSet& model, const MlpDims& dims,
                              std::span<const double> inputs,
                              std::span<const double> targets);
double mlp_loss(const ParamSet& model, const MlpDims& dims,
                std::span<const double> inputs,
                std::span<const double> targets);

// Draws x ~ N(0, I), labels y = teacher(x), returns student loss and grads.
LossAndGrad teacher_student_batch(const ParamSet& student,
                                  const ParamSet& teacher, const MlpDims& dims,
                                  std::size_t batch_size, Rng& rng);

enum class SynthDist { kLaplace, kGaussian, kLaplaceWithOutliers };

SynthDist parse_synth_dist(const std::string& name);
std::string to_string(SynthDist d);

struct SynthSpec {
  SynthDist dist = SynthDist::kLaplace;
  double scale = 1.0;
  // Outlier variant: `outliers` entries of magnitude ratio * scale with
  // random signs at distinct random positions.
  std::size_t outliers = 1;
  double ratio = 1e3;
};

std::vector<double> synth_update_vectors(const SynthSpec& spec, std::size_t d,
                                         Rng& rng);

}  // namespace lioncub
