// SPDX-License-Identifier: Apache-2.0

#include "lioncub/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "lioncub/errors.hpp"

namespace lioncub {

double LrSchedule::at(std::uint64_t t) const {
  if (kind == Kind::kConstant || total_steps == 0) return base;
  const double progress =
      std::min(1.0, static_cast<double>(t) / static_cast<double>(total_steps));
  return min_lr + 0.5 * (base - min_lr) *
                      (1.0 + std::cos(std::numbers::pi * progress));
}

void LionHyper::validate() const {
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in (0, 1)");
  if (!(lr.base > 0.0)) throw ConfigError("learning rate must be > 0");
  if (lr.kind == LrSchedule::Kind::kCosine && !(lr.min_lr > 0.0)) {
    throw ConfigError("cosine schedule needs min_lr > 0");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
}

WorkerState WorkerState::from_params(ParamSet params) {
  WorkerState s;
  s.momentum = params.zeros_like();
  s.params = std::move(params);
  return s;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void apply_update(Layer& theta, std::span<const std::int32_t> direction,
                  const LionHyper& h, double lr) {
  auto& v = theta.values;
  if (h.decay_mode == DecayMode::kDecoupled) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] -= lr * (direction[j] + h.weight_decay * v[j]);
    }
  } else {
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = v[j] - lr * direction[j] + h.weight_decay * v[j];
    }
  }
}

void update_momentum(Layer& m, const Layer& g, double beta2) {
  for (std::size_t j = 0; j < m.values.size(); ++j) {
    m.values[j] = beta2 * m.values[j] + (1.0 - beta2) * g.values[j];
  }
}

std::vector<double> interpolate(const Layer& m, const Layer& g, double beta1) {
  std::vector<double> c(m.values.size());
  for (std::size_t j = 0; j < c.size(); ++j) {
    c[j] = beta1 * m.values[j] + (1.0 - beta1) * g.values[j];
  }
  return c;
}

void check_world(const WorkerState& state, const ParamSet& grad) {
  state.params.require_same_shape(grad, "gradient");
  state.params.require_same_shape(state.momentum, "momentum");
}

}  // namespace

void lion_step(WorkerState& state, const ParamSet& grad, const LionHyper& h) {
  check_world(state, grad);
  const std::uint64_t t = state.iteration + 1;
  const double lr = h.lr.at(t);
  for (std::size_t l = 0; l < state.params.size(); ++l) {
    auto& m = state.momentum[l];
    const auto c = interpolate(m, grad[l], h.beta1);
    const auto dir = apply_sign(c, SignPolicy::ternary());
    apply_update(state.params[l], dir, h, lr);
    update_momentum(m, grad[l], h.beta2);
  }
  state.iteration = t;
}

std::string to_string(VoteAlgo algo) {
  switch (algo) {
    case VoteAlgo::kParameterServer: return "ps";
    case VoteAlgo::kParameterServerTree: return "ps_tree";
    case VoteAlgo::kDirect: return "direct";
    case VoteAlgo::kCompressed1Bit: return "compressed1bit";
  }
  return "?";
}

VoteAlgo parse_vote_algo(const std::string& name) {
  if (name == "ps") return VoteAlgo::kParameterServer;
  if (name == "ps_tree") return VoteAlgo::kParameterServerTree;
  if (name == "direct") return VoteAlgo::kDirect;
  if (name == "compressed1bit") return VoteAlgo::kCompressed1Bit;
  throw ConfigError("unknown algorithm '" + name +
                    "' (expected ps, ps_tree, direct, compressed1bit)");
}

namespace {

// Aggregates integer levels in [-q_max, q_max] with a ps/direct algorithm.
VoteResult aggregate_levels(std::span<const std::int32_t> levels,
                            std::int32_t q_max, bool binary, VoteAlgo algo,
                            std::optional<int> lane_bits, Communicator& comm) {
  switch (algo) {
    case VoteAlgo::kParameterServer:
      return ps_gather_broadcast(levels, comm, false, q_max);
    case VoteAlgo::kParameterServerTree:
      return ps_gather_broadcast(levels, comm, true, q_max);
    case VoteAlgo::kDirect: {
      DirectAllreduceOptions o;
      o.encoding = binary ? VoteEncoding::kSignBinary : VoteEncoding::kOffset;
      o.q_max = q_max;
      o.lane_bits = lane_bits;
      return direct_allreduce(levels, comm, o);
    }
    case VoteAlgo::kCompressed1Bit:
      break;
  }
  throw ConfigError("aggregate_levels: unsupported algorithm");
}

}  // namespace

StepStats signsgd_majority_step(WorkerState& state, const ParamSet& grad,
                                const LionHyper& h, Communicator& comm,
                                VoteAlgo algo) {
  state.params.require_same_shape(grad, "gradient");
  const std::uint64_t t = state.iteration + 1;
  const double lr = h.lr.at(t);
  const auto policy = SignPolicy::alternating(t);
  StepStats stats;
  stats.direction = state.params.zeros_like();
  stats.local_update = grad;
  for (std::size_t l = 0; l < state.params.size(); ++l) {
    const auto& g = grad[l].values;
    VoteResult agg;
    const auto start = Clock::now();
    if (algo == VoteAlgo::kCompressed1Bit) {
      agg = compressed_allreduce_1bit(g, comm, policy);
    } else {
      const auto signs = apply_sign(g, SignPolicy::ternary());
      agg = aggregate_levels(signs, 1, false, algo, std::nullopt, comm);
    }
    stats.communicate_s += seconds_since(start);
    const auto dir = majority_sign(agg, policy);
    auto& theta = state.params[l].values;
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= lr * dir[j];
    stats.elements += g.size();
    stats.ties += agg.ties;
    stats.direction[l].values.assign(dir.begin(), dir.end());
  }
  state.iteration = t;
  return stats;
}

StepStats distributed_lion_step(WorkerState& state, const ParamSet& grad,
                                const LionHyper& h,
                                const DistributedOptions& opts,
                                Communicator& comm, Rng& rng) {
  check_world(state, grad);
  if (opts.quant) opts.quant->validate();
  if (opts.algo == VoteAlgo::kCompressed1Bit) {
    if (opts.quant && opts.quant->bits != 1) {
      throw ConfigError("compressed 1-bit allreduce requires the sign quantizer");
    }
    if (opts.zero_mode != SignMode::kAlternating) {
      throw ConfigError("compressed 1-bit allreduce requires alternating zeros");
    }
  }

  const std::uint64_t t = state.iteration + 1;
  const double lr = h.lr.at(t);
  const SignPolicy policy{opts.zero_mode, t};

  StepStats stats;
  stats.direction = state.params.zeros_like();
  stats.local_update = state.params.zeros_like();

  for (std::size_t l = 0; l < state.params.size(); ++l) {
    auto& m = state.momentum[l];
    auto c = interpolate(m, grad[l], h.beta1);
    if (auto it = opts.masks.find(m.name); it != opts.masks.end()) {
      if (it->second.size() != c.size()) {
        throw ConfigError("mask for layer '" + m.name + "' has wrong length");
      }
      for (std::size_t j = 0; j < c.size(); ++j) {
        if (!it->second[j]) c[j] = 0.0;
      }
    }

    VoteResult agg;
    auto start = Clock::now();
    if (opts.algo == VoteAlgo::kCompressed1Bit) {
      agg = compressed_allreduce_1bit(c, comm, policy);
      stats.communicate_s += seconds_since(start);
    } else if (!opts.quant) {
      const auto sum = allreduce_sum(c, comm);
      stats.communicate_s += seconds_since(start);
      agg.values = apply_sign(sum, SignPolicy::ternary());
      agg.range_min = -1;
      agg.range_max = 1;
      for (auto v : agg.values) agg.ties += (v == 0);
    } else {
      const auto& spec = *opts.quant;
      const auto q = quantize(c, spec, rng, policy);
      stats.quantize_s += seconds_since(start);
      start = Clock::now();
      const bool sign_only = spec.bits == 1;
      const std::int32_t q_max = sign_only ? 1 : spec.max_level();
      const bool binary =
          sign_only && opts.zero_mode == SignMode::kAlternating;
      agg = aggregate_levels(q.levels, q_max, binary, opts.algo, opts.lane_bits,
                             comm);
      stats.communicate_s += seconds_since(start);
    }

    const auto dir = majority_sign(agg, policy);
    apply_update(state.params[l], dir, h, lr);
    update_momentum(m, grad[l], h.beta2);

    stats.elements += c.size();
    stats.ties += agg.ties;
    stats.direction[l].values.assign(dir.begin(), dir.end());
    stats.local_update[l].values = std::move(c);
  }
  state.iteration = t;
  return stats;
}

bool SyncPolicy::selects(const std::string& layer) const {
  switch (selector) {
    case Selector::kAll: return true;
    case Selector::kNone: return false;
    case Selector::kNamed: return layers.count(layer) > 0;
  }
  return false;
}

std::size_t maybe_sync_momentum(WorkerState& state, const SyncPolicy& policy,
                                Communicator& comm) {
  if (!policy.fires(state.iteration)) return 0;
  std::size_t synced = 0;
  for (auto& layer : state.momentum) {
    if (!policy.selects(layer.name)) continue;
    layer.values = allreduce_mean(layer.values, comm);
    ++synced;
  }
  return synced;
}

std::vector<double> momentum_divergence(const std::vector<ParamSet>& momenta) {
  if (momenta.empty()) return {};
  const auto& ref = momenta.front();
  for (const auto& m : momenta) ref.require_same_shape(m, "momentum_divergence");
  const double p = static_cast<double>(momenta.size());
  std::vector<double> out(ref.size(), 0.0);
  for (std::size_t l = 0; l < ref.size(); ++l) {
    for (std::size_t j = 0; j < ref[l].values.size(); ++j) {
      // Deviations from the first worker's value, so equal inputs give 0.
      const double shift = ref[l].values[j];
      double mean = 0.0;
      for (const auto& m : momenta) mean += m[l].values[j] - shift;
      mean /= p;
      double var = 0.0;
      for (const auto& m : momenta) {
        const double d = (m[l].values[j] - shift) - mean;
        var += d * d;
      }
      out[l] = std::max(out[l], std::sqrt(var / p));
    }
  }
  return out;
}

std::vector<double> momentum_divergence(const WorkerState& state,
                                        Communicator& comm) {
  const int p = comm.world_size();
  std::vector<ParamSet> momenta(static_cast<std::size_t>(p),
                                state.momentum.zeros_like());
  for (std::size_t l = 0; l < state.momentum.size(); ++l) {
    auto blocks = allgather(state.momentum[l].values, comm);
    for (int r = 0; r < p; ++r) momenta[r][l].values = std::move(blocks[r]);
  }
  return momentum_divergence(momenta);
}

}  // namespace lioncub
