// SPDX-License-Identifier: Apache-2.0

// Lion, signSGD with majority vote, and distributed Lion with quantized
// update aggregation.
//
// Per worker i and step t (gradient g_i, learning rate lr_t):
//   c_i   = beta1 * m_i + (1 - beta1) * g_i
//   c*    = sum_i Q(c_i)                       (collective)
//   theta = theta - lr_t * (sign(c*) + wd * theta)
//   m_i   = beta2 * m_i + (1 - beta2) * g_i    (local gradient only)
//
// Momentum never travels with the update; maybe_sync_momentum averages it on
// a schedule.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lioncub/collectives.hpp"
#include "lioncub/communicator.hpp"
#include "lioncub/param_set.hpp"
#include "lioncub/quant.hpp"
#include "lioncub/rng.hpp"

namespace lioncub {

struct LrSchedule {
  enum class Kind { kConstant, kCosine };
  Kind kind = Kind::kConstant;
  double base = 1e-4;
  // Cosine decays from base to min_lr over total_steps.
  double min_lr = 0.0;
  std::uint64_t total_steps = 0;

  double at(std::uint64_t t) const;
};

enum class DecayMode {
  // theta -= lr * wd * theta
  kDecoupled,
  // theta += wd * theta, the literal reading of the distributed algorithm's
  // update line. Kept for comparison only.
  kLiteral,
};

struct LionHyper {
  double beta1 = 0.9;
  double beta2 = 0.99;
  LrSchedule lr;
  double weight_decay = 0.0;
  DecayMode decay_mode = DecayMode::kDecoupled;

  void validate() const;
};

struct WorkerState {
  ParamSet params;
  ParamSet momentum;
  // Completed steps; a step runs as iteration + 1.
  std::uint64_t iteration = 0;

  static WorkerState from_params(ParamSet params);
};

// Single-worker Lion. Exact zeros in c_t give no sign update.
void lion_step(WorkerState& state, const ParamSet& grad, const LionHyper& h);

enum class VoteAlgo { kParameterServer, kParameterServerTree, kDirect, kCompressed1Bit };

std::string to_string(VoteAlgo algo);
VoteAlgo parse_vote_algo(const std::string& name);

struct StepStats {
  std::size_t elements = 0;
  std::size_t ties = 0;
  // Per layer: the applied direction sign(c*) and the local c_i.
  ParamSet direction;
  ParamSet local_update;
  // Wall-clock seconds spent quantizing and inside collectives.
  double quantize_s = 0.0;
  double communicate_s = 0.0;
};

// signSGD with majority vote: theta -= lr_t * majority(sign(g_i)).
// kCompressed1Bit and kDirect resolve exact-zero gradients with the
// alternating policy; the parameter-server paths keep them as 0.
StepStats signsgd_majority_step(WorkerState& state, const ParamSet& grad,
                                const LionHyper& h, Communicator& comm,
                                VoteAlgo algo);

struct DistributedOptions {
  VoteAlgo algo = VoteAlgo::kDirect;
  // nullopt: no quantization, c* is the real-valued sum of the c_i.
  std::optional<QuantSpec> quant;
  // How zeros of the aggregate (and of 1-bit worker signs) are resolved.
  SignMode zero_mode = SignMode::kAlternating;
  // Lane for the direct path; nullopt picks automatically.
  std::optional<int> lane_bits;
  // Per-layer element masks; masked-out coordinates of c_i are zeroed
  // before quantization.
  std::map<std::string, std::vector<bool>> masks;
};

StepStats distributed_lion_step(WorkerState& state, const ParamSet& grad,
                                const LionHyper& h,
                                const DistributedOptions& opts,
                                Communicator& comm, Rng& rng);

struct SyncPolicy {
  // 0 disables synchronization.
  std::uint64_t period = 0;
  enum class Selector { kAll, kNone, kNamed };
  Selector selector = Selector::kAll;
  std::set<std::string> layers;

  bool fires(std::uint64_t t) const { return period > 0 && t % period == 0; }
  bool selects(const std::string& layer) const;
};

// Replaces selected layers' momenta by their mean across ranks when the
// policy fires at state.iteration. Returns the number of layers synced.
std::size_t maybe_sync_momentum(WorkerState& state, const SyncPolicy& policy,
                                Communicator& comm);

// Per layer: max over elements of the population standard deviation of the
// momentum across workers.
std::vector<double> momentum_divergence(const std::vector<ParamSet>& momenta);
std::vector<double> momentum_divergence(const WorkerState& state,
                                        Communicator& comm);

}  // namespace lioncub
