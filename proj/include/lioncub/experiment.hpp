// SPDX-License-Identifier: Apache-2.0

// Experiment drivers behind the command-line tool: the distributed toy
// training run, the quantizer sign-agreement benchmark, and their reports.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lioncub/communicator.hpp"
#include "lioncub/optimizer.hpp"
#include "lioncub/quant.hpp"
#include "lioncub/workloads.hpp"

namespace lioncub {

enum class TrainMode { kDistributedLion, kLion, kSignSgd };

struct TrainConfig {
  TrainMode mode = TrainMode::kDistributedLion;
  int world = 8;
  std::uint64_t steps = 500;
  std::size_t batch_size = 64;
  std::size_t eval_samples = 1024;
  MlpDims model;
  LionHyper hyper;
  DistributedOptions dist;
  SyncPolicy sync;
  // `noise.seed` is overwritten with a stream derived from `seed`.
  NoiseSpec noise;
  std::uint64_t seed = 0;
  // Divergence is measured every k steps (and at the last step); 0 = last only.
  std::uint64_t divergence_every = 1;
  std::uint64_t timeout_ms = 30000;

  // Parses the run-config JSON; throws ConfigError with a diagnostic.
  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;

  // Defaults for the toy heavy-tailed noise experiment.
  static TrainConfig toy_defaults();
};

struct DerivedSeeds {
  std::uint64_t teacher = 0;
  std::uint64_t student = 0;
  std::uint64_t data = 0;
  std::uint64_t noise = 0;
  std::uint64_t quant = 0;
  std::uint64_t eval = 0;

  static DerivedSeeds from(std::uint64_t seed);
};

struct MetricRow {
  std::uint64_t step = 0;
  double loss = 0.0;
  double tie_rate = 0.0;
  double sign_match = 0.0;
  double flip_rate = 0.0;
  // Per layer, in model layer order; NaN when not measured at this step.
  std::vector<double> divergence;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

struct PhaseTiming {
  double mean_s = 0.0;
  double p95_s = 0.0;

  friend bool operator==(const PhaseTiming&, const PhaseTiming&) = default;
};

struct RunReport {
  nlohmann::json config;
  int world_size = 0;
  std::string transport;
  DerivedSeeds seeds;
  std::vector<std::string> layer_names;
  std::vector<MetricRow> rows;

  double final_loss = 0.0;        // fixed evaluation set
  double final_train_loss = 0.0;  // last step's mean minibatch loss
  double mean_tie_rate = 0.0;
  double mean_sign_match = 0.0;
  double mean_flip_rate = 0.0;
  PhaseTiming compute;
  PhaseTiming quantize;
  PhaseTiming communicate;
  std::uint64_t params_fingerprint = 0;

  nlohmann::json to_json() const;
  static RunReport from_json(const nlohmann::json& j);

  // step,loss,tie_rate,sign_match,flip_rate,div_<layer>...
  std::string csv_header() const;
  void write_csv(std::ostream& os) const;
};

// Runs one rank of a training run. Every rank returns the same metrics;
// timings are averaged across ranks.
RunReport run_worker(const TrainConfig& cfg, Communicator& comm);

// Runs all ranks on threads with the in-process transport.
RunReport run_training(const TrainConfig& cfg);

struct QuantBenchConfig {
  int workers = 8;
  std::size_t dim = 4096;
  std::size_t trials = 10;
  int bits = 8;
  std::uint64_t seed = 0;
  // Worker i sees shared * s + worker_noise * e_i where s ~ Laplace(scale) is
  // common and e_i ~ `dist` is private.
  SynthSpec dist;
  double shared = 1.0;
  double worker_noise = 1.0;
  // Every worker uses worker 0's vector.
  bool identical = false;
  std::vector<std::string> variants = {"1bit",  "Q_inf", "Q_inf_nozero",
                                       "log",   "Q_1",   "Q_0"};

  static QuantBenchConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

struct QuantBenchRow {
  std::string quantizer;
  double sign_match_rate = 0.0;
  double flip_rate = 0.0;
  double tie_rate = 0.0;
};

// QuantSpec for a named benchmark variant.
QuantSpec bench_variant_spec(const std::string& name, int bits);

// Reference: sign(sum_i c_i). For each variant: match = P[sign(sum Q(c_i))
// equals a nonzero reference sign], flip = P[sign is strictly opposite],
// tie = P[aggregate is exactly 0].
std::vector<QuantBenchRow> run_quant_bench(const QuantBenchConfig& cfg);

inline constexpr const char* kQuantBenchCsvHeader =
    "quantizer,sign_match_rate,flip_rate,tie_rate";
void write_quant_bench_csv(std::ostream& os,
                           const std::vector<QuantBenchRow>& rows);

}  // namespace lioncub
