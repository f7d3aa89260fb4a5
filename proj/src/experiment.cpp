// SPDX-License-Identifier: Apache-2.0

#include "lioncub/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "lioncub/collectives.hpp"
#include "lioncub/errors.hpp"

namespace lioncub {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

double parse_norm(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return kInfNorm;
    throw ConfigError("norm_p must be a number or \"inf\"");
  }
  if (!j.is_number()) throw ConfigError("norm_p must be a number or \"inf\"");
  return j.get<double>();
}

json norm_to_json(double p) {
  if (std::isinf(p)) return "inf";
  return p;
}

QuantSpec parse_quant(const json& j) {
  QuantSpec q;
  q.bits = get_or<int>(j, "bits", 8);
  q.norm_p = j.contains("norm_p") ? parse_norm(j.at("norm_p")) : 1.0;
  const auto rounding = get_or<std::string>(
      j, "rounding", std::isinf(q.norm_p) ? "stochastic" : "nearest");
  if (rounding == "nearest") {
    q.rounding = Rounding::kNearestEven;
  } else if (rounding == "stochastic") {
    q.rounding = Rounding::kStochastic;
  } else {
    throw ConfigError("rounding must be \"nearest\" or \"stochastic\"");
  }
  q.log_transform = get_or<bool>(j, "log_transform", false);
  q.no_zero = get_or<bool>(j, "no_zero", false);
  q.validate();
  return q;
}

json quant_to_json(const QuantSpec& q) {
  return {{"bits", q.bits},
          {"norm_p", norm_to_json(q.norm_p)},
          {"rounding",
           q.rounding == Rounding::kStochastic ? "stochastic" : "nearest"},
          {"log_transform", q.log_transform},
          {"no_zero", q.no_zero}};
}

std::string mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::kDistributedLion: return "distributed_lion";
    case TrainMode::kLion: return "lion";
    case TrainMode::kSignSgd: return "signsgd";
  }
  return "?";
}

double percentile95(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(v.size()))) - 1;
  return v[std::min(idx, v.size() - 1)];
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

int sign_of(double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

}  // namespace

TrainConfig TrainConfig::toy_defaults() {
  TrainConfig c;
  c.mode = TrainMode::kDistributedLion;
  c.world = 8;
  c.steps = 500;
  c.batch_size = 64;
  c.hyper.beta1 = 0.9;
  c.hyper.beta2 = 0.99;
  c.hyper.lr.base = 3e-4;
  c.hyper.weight_decay = 0.0;
  c.dist.algo = VoteAlgo::kDirect;
  c.dist.quant = QuantSpec::lp(8, 1.0);
  c.noise.levy_alpha = 2.0;
  c.noise.scale = 1e-4;
  return c;
}

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  TrainConfig c = toy_defaults();
  const auto mode = get_or<std::string>(j, "mode", "distributed_lion");
  if (mode == "distributed_lion") {
    c.mode = TrainMode::kDistributedLion;
  } else if (mode == "lion") {
    c.mode = TrainMode::kLion;
  } else if (mode == "signsgd") {
    c.mode = TrainMode::kSignSgd;
  } else {
    throw ConfigError("unknown mode '" + mode + "'");
  }
  c.world = get_or<int>(j, "world", c.world);
  c.steps = get_or<std::uint64_t>(j, "steps", c.steps);
  c.batch_size = get_or<std::size_t>(j, "batch_size", c.batch_size);
  c.eval_samples = get_or<std::size_t>(j, "eval_samples", c.eval_samples);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.divergence_every = get_or<std::uint64_t>(j, "divergence_every", c.divergence_every);
  c.timeout_ms = get_or<std::uint64_t>(j, "timeout_ms", c.timeout_ms);

  if (j.contains("model")) {
    const auto& m = j.at("model");
    c.model.in_dim = get_or<std::size_t>(m, "in_dim", c.model.in_dim);
    c.model.hidden = get_or<std::size_t>(m, "hidden", c.model.hidden);
    c.model.out_dim = get_or<std::size_t>(m, "out_dim", c.model.out_dim);
  }
  if (j.contains("hyper")) {
    const auto& h = j.at("hyper");
    c.hyper.beta1 = get_or<double>(h, "beta1", c.hyper.beta1);
    c.hyper.beta2 = get_or<double>(h, "beta2", c.hyper.beta2);
    c.hyper.lr.base = get_or<double>(h, "lr", c.hyper.lr.base);
    const auto sched = get_or<std::string>(h, "lr_schedule", "constant");
    if (sched == "constant") {
      c.hyper.lr.kind = LrSchedule::Kind::kConstant;
    } else if (sched == "cosine") {
      c.hyper.lr.kind = LrSchedule::Kind::kCosine;
    } else {
      throw ConfigError("lr_schedule must be \"constant\" or \"cosine\"");
    }
    c.hyper.lr.min_lr = get_or<double>(h, "min_lr", c.hyper.lr.min_lr);
    c.hyper.weight_decay = get_or<double>(h, "weight_decay", c.hyper.weight_decay);
    const auto decay = get_or<std::string>(h, "decay_mode", "decoupled");
    if (decay == "decoupled") {
      c.hyper.decay_mode = DecayMode::kDecoupled;
    } else if (decay == "literal") {
      c.hyper.decay_mode = DecayMode::kLiteral;
    } else {
      throw ConfigError("decay_mode must be \"decoupled\" or \"literal\"");
    }
  }
  c.hyper.lr.total_steps = c.steps;

  c.dist.algo = parse_vote_algo(get_or<std::string>(j, "algo", "direct"));
  if (j.contains("quant")) {
    if (j.at("quant").is_null()) {
      c.dist.quant.reset();
    } else {
      c.dist.quant = parse_quant(j.at("quant"));
    }
  }
  const auto zero = get_or<std::string>(j, "zero_mode", "alternating");
  if (zero == "alternating") {
    c.dist.zero_mode = SignMode::kAlternating;
  } else if (zero == "ternary") {
    c.dist.zero_mode = SignMode::kExactTernary;
  } else {
    throw ConfigError("zero_mode must be \"alternating\" or \"ternary\"");
  }
  if (j.contains("lane_bits") && !j.at("lane_bits").is_null()) {
    c.dist.lane_bits = get_or<int>(j, "lane_bits", 8);
  }

  if (j.contains("sync")) {
    const auto& s = j.at("sync");
    c.sync.period = get_or<std::uint64_t>(s, "period", 0);
    if (!s.contains("layers") || s.at("layers") == "all") {
      c.sync.selector = SyncPolicy::Selector::kAll;
    } else if (s.at("layers") == "none") {
      c.sync.selector = SyncPolicy::Selector::kNone;
    } else if (s.at("layers").is_array()) {
      c.sync.selector = SyncPolicy::Selector::kNamed;
      for (const auto& name : s.at("layers")) {
        if (!name.is_string()) throw ConfigError("sync.layers entries must be strings");
        c.sync.layers.insert(name.get<std::string>());
      }
    } else {
      throw ConfigError("sync.layers must be \"all\", \"none\" or a list of names");
    }
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    c.noise.levy_alpha = get_or<double>(n, "levy_alpha", c.noise.levy_alpha);
    c.noise.scale = get_or<double>(n, "scale", c.noise.scale);
  }
  c.validate();
  return c;
}

json TrainConfig::to_json() const {
  json j;
  j["mode"] = mode_name(mode);
  j["world"] = world;
  j["steps"] = steps;
  j["batch_size"] = batch_size;
  j["eval_samples"] = eval_samples;
  j["seed"] = seed;
  j["divergence_every"] = divergence_every;
  j["timeout_ms"] = timeout_ms;
  j["model"] = {{"in_dim", model.in_dim},
                {"hidden", model.hidden},
                {"out_dim", model.out_dim}};
  j["hyper"] = {
      {"beta1", hyper.beta1},
      {"beta2", hyper.beta2},
      {"lr", hyper.lr.base},
      {"lr_schedule",
       hyper.lr.kind == LrSchedule::Kind::kCosine ? "cosine" : "constant"},
      {"min_lr", hyper.lr.min_lr},
      {"weight_decay", hyper.weight_decay},
      {"decay_mode",
       hyper.decay_mode == DecayMode::kDecoupled ? "decoupled" : "literal"}};
  j["algo"] = to_string(dist.algo);
  j["quant"] = dist.quant ? quant_to_json(*dist.quant) : json(nullptr);
  j["zero_mode"] =
      dist.zero_mode == SignMode::kAlternating ? "alternating" : "ternary";
  j["lane_bits"] = dist.lane_bits ? json(*dist.lane_bits) : json(nullptr);
  json layers;
  switch (sync.selector) {
    case SyncPolicy::Selector::kAll: layers = "all"; break;
    case SyncPolicy::Selector::kNone: layers = "none"; break;
    case SyncPolicy::Selector::kNamed:
      layers = std::vector<std::string>(sync.layers.begin(), sync.layers.end());
      break;
  }
  j["sync"] = {{"period", sync.period}, {"layers", layers}};
  j["noise"] = {{"levy_alpha", noise.levy_alpha}, {"scale", noise.scale}};
  return j;
}

void TrainConfig::validate() const {
  if (world < 1) throw ConfigError("world must be >= 1");
  if (mode == TrainMode::kLion && world != 1) {
    throw ConfigError("mode \"lion\" is single-worker; set world to 1");
  }
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (eval_samples < 1) throw ConfigError("eval_samples must be >= 1");
  if (timeout_ms < 1) throw ConfigError("timeout_ms must be >= 1");
  make_mlp(model);
  hyper.validate();
  noise.validate();
  if (dist.quant) dist.quant->validate();
  if (mode == TrainMode::kDistributedLion) {
    if (dist.algo == VoteAlgo::kCompressed1Bit) {
      if (dist.quant && dist.quant->bits != 1) {
        throw ConfigError("algo compressed1bit needs quant.bits = 1 (or no quant)");
      }
      if (dist.zero_mode != SignMode::kAlternating) {
        throw ConfigError("algo compressed1bit needs zero_mode \"alternating\"");
      }
    }
    if (dist.algo == VoteAlgo::kDirect && dist.quant) {
      DirectAllreduceOptions o;
      const bool sign_only = dist.quant->bits == 1;
      o.q_max = sign_only ? 1 : dist.quant->max_level();
      o.encoding = sign_only && dist.zero_mode == SignMode::kAlternating
                       ? VoteEncoding::kSignBinary
                       : VoteEncoding::kOffset;
      o.lane_bits = dist.lane_bits;
      direct_allreduce_lane(world, o);
    }
  }
  if (sync.selector == SyncPolicy::Selector::kNamed) {
    const auto ps = make_mlp(model);
    for (const auto& name : sync.layers) {
      if (!ps.find(name)) throw ConfigError("sync layer '" + name + "' does not exist");
    }
  }
}

DerivedSeeds DerivedSeeds::from(std::uint64_t seed) {
  DerivedSeeds s;
  s.teacher = derive_seed(seed, {1});
  s.student = derive_seed(seed, {2});
  s.data = derive_seed(seed, {3});
  s.noise = derive_seed(seed, {4});
  s.quant = derive_seed(seed, {5});
  s.eval = derive_seed(seed, {6});
  return s;
}

RunReport run_worker(const TrainConfig& cfg, Communicator& comm) {
  cfg.validate();
  if (comm.world_size() != cfg.world) {
    throw ConfigError("communicator world size " +
                      std::to_string(comm.world_size()) +
                      " does not match config world " + std::to_string(cfg.world));
  }
  const int rank = comm.rank();
  const auto seeds = DerivedSeeds::from(cfg.seed);

  Rng teacher_rng(seeds.teacher);
  const ParamSet teacher = init_mlp(cfg.model, teacher_rng);
  Rng student_rng(seeds.student);
  WorkerState state = WorkerState::from_params(init_mlp(cfg.model, student_rng));

  std::vector<double> eval_x(cfg.eval_samples * cfg.model.in_dim);
  Rng eval_rng(seeds.eval);
  for (auto& v : eval_x) v = eval_rng.normal();
  const auto eval_y = mlp_forward(teacher, cfg.model, eval_x);

  NoiseSpec noise = cfg.noise;
  noise.seed = seeds.noise;
  Rng quant_rng = Rng::keyed(seeds.quant, {static_cast<std::uint64_t>(rank)});

  RunReport report;
  report.config = cfg.to_json();
  report.world_size = comm.world_size();
  report.transport = comm.transport().name();
  report.seeds = seeds;
  for (const auto& l : state.params) report.layer_names.push_back(l.name);

  std::vector<double> t_compute, t_quant, t_comm;
  const std::size_t n_layers = state.params.size();

  for (std::uint64_t t = 1; t <= cfg.steps; ++t) {
    const auto start = Clock::now();
    Rng data_rng = Rng::keyed(seeds.data, {static_cast<std::uint64_t>(rank), t});
    const auto batch = teacher_student_batch(state.params, teacher, cfg.model,
                                             cfg.batch_size, data_rng);
    const ParamSet grad =
        noisy_client_grads(batch.grads, noise, static_cast<std::uint64_t>(rank), t);
    t_compute.push_back(std::chrono::duration<double>(Clock::now() - start).count());

    StepStats stats;
    switch (cfg.mode) {
      case TrainMode::kDistributedLion:
        stats = distributed_lion_step(state, grad, cfg.hyper, cfg.dist, comm,
                                      quant_rng);
        break;
      case TrainMode::kSignSgd:
        stats = signsgd_majority_step(state, grad, cfg.hyper, comm, cfg.dist.algo);
        break;
      case TrainMode::kLion: {
        stats.local_update = state.params.zeros_like();
        stats.direction = state.params.zeros_like();
        for (std::size_t l = 0; l < n_layers; ++l) {
          auto& c = stats.local_update[l].values;
          const auto& m = state.momentum[l].values;
          for (std::size_t e = 0; e < c.size(); ++e) {
            c[e] = cfg.hyper.beta1 * m[e] + (1.0 - cfg.hyper.beta1) * grad[l].values[e];
          }
          const auto dir = apply_sign(c, SignPolicy::ternary());
          stats.direction[l].values.assign(dir.begin(), dir.end());
          for (double v : c) stats.ties += (v == 0.0);
          stats.elements += c.size();
        }
        lion_step(state, grad, cfg.hyper);
        break;
      }
    }
    const auto sync_start = Clock::now();
    maybe_sync_momentum(state, cfg.sync, comm);
    t_quant.push_back(stats.quantize_s);
    t_comm.push_back(stats.communicate_s +
                     std::chrono::duration<double>(Clock::now() - sync_start).count());

    MetricRow row;
    row.step = t;
    row.loss = allreduce_mean(std::vector<double>{batch.loss}, comm)[0];
    row.tie_rate = static_cast<double>(stats.ties) /
                   static_cast<double>(std::max<std::size_t>(stats.elements, 1));
    std::size_t match = 0, flip = 0, total = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto reference = allreduce_sum(stats.local_update[l].values, comm);
      const auto& dir = stats.direction[l].values;
      for (std::size_t e = 0; e < dir.size(); ++e) {
        const int ref = sign_of(reference[e]);
        const int got = sign_of(dir[e]);
        if (ref != 0 && got == ref) ++match;
        if (ref != 0 && got == -ref) ++flip;
        ++total;
      }
    }
    row.sign_match = static_cast<double>(match) / static_cast<double>(total);
    row.flip_rate = static_cast<double>(flip) / static_cast<double>(total);
    const bool measure_div =
        t == cfg.steps || (cfg.divergence_every > 0 && t % cfg.divergence_every == 0);
    row.divergence = measure_div
                         ? momentum_divergence(state, comm)
                         : std::vector<double>(n_layers,
                                               std::numeric_limits<double>::quiet_NaN());
    report.rows.push_back(std::move(row));
  }

  report.final_loss = mlp_loss(state.params, cfg.model, eval_x, eval_y);
  report.final_train_loss = report.rows.back().loss;
  double ties = 0, matches = 0, flips = 0;
  for (const auto& r : report.rows) {
    ties += r.tie_rate;
    matches += r.sign_match;
    flips += r.flip_rate;
  }
  const double n = static_cast<double>(report.rows.size());
  report.mean_tie_rate = ties / n;
  report.mean_sign_match = matches / n;
  report.mean_flip_rate = flips / n;

  const auto timing = allreduce_mean(
      std::vector<double>{mean_of(t_compute), percentile95(t_compute),
                          mean_of(t_quant), percentile95(t_quant),
                          mean_of(t_comm), percentile95(t_comm)},
      comm);
  report.compute = {timing[0], timing[1]};
  report.quantize = {timing[2], timing[3]};
  report.communicate = {timing[4], timing[5]};

  report.params_fingerprint = state.params.fingerprint();
  const auto prints = allgather(
      std::vector<double>{static_cast<double>(report.params_fingerprint >> 32),
                          static_cast<double>(report.params_fingerprint & 0xFFFFFFFFu)},
      comm);
  for (const auto& p : prints) {
    if (p != prints.front()) {
      throw CollectiveError("parameters diverged across ranks", comm.generation(),
                            "consistency-check", -1);
    }
  }
  return report;
}

RunReport run_training(const TrainConfig& cfg) {
  cfg.validate();
  auto reports = run_on_group(
      cfg.world, [&](Communicator& comm) { return run_worker(cfg, comm); },
      std::chrono::milliseconds(cfg.timeout_ms));
  return std::move(reports.front());
}

namespace {

json timing_json(const PhaseTiming& t) {
  return {{"mean_s", t.mean_s}, {"p95_s", t.p95_s}};
}

PhaseTiming timing_from(const json& j) {
  return {j.at("mean_s").get<double>(), j.at("p95_s").get<double>()};
}

// NaN has no JSON representation; unmeasured divergence is stored as null.
json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

double from_nullable(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

json RunReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    json div = json::array();
    for (double d : r.divergence) div.push_back(nullable(d));
    rows_json.push_back({{"step", r.step},
                         {"loss", r.loss},
                         {"tie_rate", r.tie_rate},
                         {"sign_match", r.sign_match},
                         {"flip_rate", r.flip_rate},
                         {"divergence", div}});
  }
  return {
      {"config", config},
      {"environment", {{"world_size", world_size}, {"transport", transport}}},
      {"seeds",
       {{"teacher", seeds.teacher},
        {"student", seeds.student},
        {"data", seeds.data},
        {"noise", seeds.noise},
        {"quant", seeds.quant},
        {"eval", seeds.eval}}},
      {"layers", layer_names},
      {"rows", rows_json},
      {"summary",
       {{"final_loss", final_loss},
        {"final_train_loss", final_train_loss},
        {"mean_tie_rate", mean_tie_rate},
        {"mean_sign_match", mean_sign_match},
        {"mean_flip_rate", mean_flip_rate},
        {"params_fingerprint", params_fingerprint},
        {"timing",
         {{"compute", timing_json(compute)},
          {"quantize_pack", timing_json(quantize)},
          {"communicate", timing_json(communicate)}}}}},
  };
}

RunReport RunReport::from_json(const json& j) {
  RunReport r;
  try {
    r.config = j.at("config");
    r.world_size = j.at("environment").at("world_size").get<int>();
    r.transport = j.at("environment").at("transport").get<std::string>();
    const auto& s = j.at("seeds");
    r.seeds.teacher = s.at("teacher").get<std::uint64_t>();
    r.seeds.student = s.at("student").get<std::uint64_t>();
    r.seeds.data = s.at("data").get<std::uint64_t>();
    r.seeds.noise = s.at("noise").get<std::uint64_t>();
    r.seeds.quant = s.at("quant").get<std::uint64_t>();
    r.seeds.eval = s.at("eval").get<std::uint64_t>();
    r.layer_names = j.at("layers").get<std::vector<std::string>>();
    for (const auto& row : j.at("rows")) {
      MetricRow m;
      m.step = row.at("step").get<std::uint64_t>();
      m.loss = row.at("loss").get<double>();
      m.tie_rate = row.at("tie_rate").get<double>();
      m.sign_match = row.at("sign_match").get<double>();
      m.flip_rate = row.at("flip_rate").get<double>();
      for (const auto& d : row.at("divergence")) m.divergence.push_back(from_nullable(d));
      r.rows.push_back(std::move(m));
    }
    const auto& sum = j.at("summary");
    r.final_loss = sum.at("final_loss").get<double>();
    r.final_train_loss = sum.at("final_train_loss").get<double>();
    r.mean_tie_rate = sum.at("mean_tie_rate").get<double>();
    r.mean_sign_match = sum.at("mean_sign_match").get<double>();
    r.mean_flip_rate = sum.at("mean_flip_rate").get<double>();
    r.params_fingerprint = sum.at("params_fingerprint").get<std::uint64_t>();
    const auto& t = sum.at("timing");
    r.compute = timing_from(t.at("compute"));
    r.quantize = timing_from(t.at("quantize_pack"));
    r.communicate = timing_from(t.at("communicate"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("run report: ") + e.what());
  }
  return r;
}

std::string RunReport::csv_header() const {
  std::string h = "step,loss,tie_rate,sign_match,flip_rate";
  for (const auto& name : layer_names) h += ",div_" + name;
  return h;
}

void RunReport::write_csv(std::ostream& os) const {
  const auto old_precision = os.precision(17);
  os << csv_header() << '\n';
  for (const auto& r : rows) {
    os << r.step << ',' << r.loss << ',' << r.tie_rate << ',' << r.sign_match
       << ',' << r.flip_rate;
    for (double d : r.divergence) {
      os << ',';
      if (!std::isnan(d)) os << d;
    }
    os << '\n';
  }
  os.precision(old_precision);
}

QuantBenchConfig QuantBenchConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  QuantBenchConfig c;
  c.workers = get_or<int>(j, "workers", c.workers);
  c.dim = get_or<std::size_t>(j, "dim", c.dim);
  c.trials = get_or<std::size_t>(j, "trials", c.trials);
  c.bits = get_or<int>(j, "bits", c.bits);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.shared = get_or<double>(j, "shared", c.shared);
  c.worker_noise = get_or<double>(j, "worker_noise", c.worker_noise);
  c.identical = get_or<bool>(j, "identical", c.identical);
  if (j.contains("dist")) {
    const auto& d = j.at("dist");
    c.dist.dist = parse_synth_dist(get_or<std::string>(d, "kind", "laplace"));
    c.dist.scale = get_or<double>(d, "scale", c.dist.scale);
    c.dist.outliers = get_or<std::size_t>(d, "outliers", c.dist.outliers);
    c.dist.ratio = get_or<double>(d, "ratio", c.dist.ratio);
  }
  if (j.contains("variants")) {
    c.variants = get_or<std::vector<std::string>>(j, "variants", c.variants);
  }
  c.validate();
  return c;
}

json QuantBenchConfig::to_json() const {
  return {{"workers", workers},
          {"dim", dim},
          {"trials", trials},
          {"bits", bits},
          {"seed", seed},
          {"shared", shared},
          {"worker_noise", worker_noise},
          {"identical", identical},
          {"dist",
           {{"kind", to_string(dist.dist)},
            {"scale", dist.scale},
            {"outliers", dist.outliers},
            {"ratio", dist.ratio}}},
          {"variants", variants}};
}

void QuantBenchConfig::validate() const {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (variants.empty()) throw ConfigError("variants must not be empty");
  for (const auto& v : variants) bench_variant_spec(v, bits);
}

QuantSpec bench_variant_spec(const std::string& name, int bits) {
  QuantSpec s;
  if (name == "1bit") {
    s = QuantSpec::sign();
  } else if (name == "Q_inf") {
    s = QuantSpec::linf(bits);
  } else if (name == "Q_inf_nozero") {
    s = QuantSpec::linf(bits);
    s.no_zero = true;
  } else if (name == "log") {
    s = QuantSpec::linf(bits);
    s.log_transform = true;
  } else if (name == "Q_1") {
    s = QuantSpec::lp(bits, 1.0);
  } else if (name == "Q_0") {
    s = QuantSpec::lp(bits, 0.0);
  } else {
    throw ConfigError("unknown quantizer variant '" + name +
                      "' (expected 1bit, Q_inf, Q_inf_nozero, log, Q_1, Q_0)");
  }
  s.validate();
  return s;
}

std::vector<QuantBenchRow> run_quant_bench(const QuantBenchConfig& cfg) {
  cfg.validate();
  std::vector<QuantSpec> specs;
  for (const auto& v : cfg.variants) specs.push_back(bench_variant_spec(v, cfg.bits));

  const auto p = static_cast<std::size_t>(cfg.workers);
  std::vector<QuantBenchRow> rows(specs.size());
  for (std::size_t k = 0; k < specs.size(); ++k) rows[k].quantizer = cfg.variants[k];

  const double denom = static_cast<double>(cfg.dim * cfg.trials);
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    Rng shared_rng = Rng::keyed(cfg.seed, {trial, 0xFFFFFFFFull});
    std::vector<double> common(cfg.dim, 0.0);
    if (cfg.shared != 0.0) {
      for (auto& v : common) v = cfg.shared * shared_rng.laplace(cfg.dist.scale);
    }
    std::vector<std::vector<double>> updates(p);
    for (std::size_t i = 0; i < p; ++i) {
      if (cfg.identical && i > 0) {
        updates[i] = updates[0];
        continue;
      }
      Rng wr = Rng::keyed(cfg.seed, {trial, i});
      auto e = synth_update_vectors(cfg.dist, cfg.dim, wr);
      for (std::size_t j = 0; j < cfg.dim; ++j) {
        e[j] = common[j] + cfg.worker_noise * e[j];
      }
      updates[i] = std::move(e);
    }

    std::vector<double> reference(cfg.dim, 0.0);
    for (const auto& u : updates) {
      for (std::size_t j = 0; j < cfg.dim; ++j) reference[j] += u[j];
    }

    for (std::size_t k = 0; k < specs.size(); ++k) {
      std::vector<std::int64_t> agg(cfg.dim, 0);
      for (std::size_t i = 0; i < p; ++i) {
        Rng qr = Rng::keyed(cfg.seed, {trial, i, k, 0xABCDull});
        const auto q = quantize(updates[i], specs[k], qr, SignPolicy::ternary());
        for (std::size_t j = 0; j < cfg.dim; ++j) agg[j] += q.levels[j];
      }
      for (std::size_t j = 0; j < cfg.dim; ++j) {
        const int ref = sign_of(reference[j]);
        const int got = agg[j] > 0 ? 1 : (agg[j] < 0 ? -1 : 0);
        if (ref != 0 && got == ref) rows[k].sign_match_rate += 1.0;
        if (ref != 0 && got == -ref) rows[k].flip_rate += 1.0;
        if (got == 0) rows[k].tie_rate += 1.0;
      }
    }
  }
  for (auto& r : rows) {
    r.sign_match_rate /= denom;
    r.flip_rate /= denom;
    r.tie_rate /= denom;
  }
  return rows;
}

void write_quant_bench_csv(std::ostream& os,
                           const std::vector<QuantBenchRow>& rows) {
  const auto old_precision = os.precision(17);
  os << kQuantBenchCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.quantizer << ',' << r.sign_match_rate << ',' << r.flip_rate << ','
       << r.tie_rate << '\n';
  }
  os.precision(old_precision);
}

}  // namespace lioncub
