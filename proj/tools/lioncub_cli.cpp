// SPDX-License-Identifier: Apache-2.0

// lioncub: distributed Lion experiments, quantizer benchmark, alpha-beta
// cost model and self-tests.
//
// Exit codes: 0 success, 2 configuration error, 3 collective/runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "lioncub/costmodel.hpp"
#include "lioncub/errors.hpp"
#include "lioncub/experiment.hpp"
#include "lioncub/selftest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw lioncub::ConfigError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw lioncub::ConfigError("config " + path + ": " + e.what());
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw lioncub::ConfigError("cannot create output directory " + dir);
}

struct TrainArgs {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::string transport = "inproc";
  std::optional<int> world;
  std::optional<int> rank;
  int port = 29500;
  std::string host = "127.0.0.1";
};

int cmd_train(const TrainArgs& a) {
  json j = read_config(a.config);
  if (a.seed) j["seed"] = *a.seed;
  if (a.world) j["world"] = *a.world;
  const auto cfg = lioncub::TrainConfig::from_json(j);

  lioncub::RunReport report;
  if (a.transport == "inproc") {
    report = lioncub::run_training(cfg);
  } else if (a.transport == "socket") {
    if (!a.rank) throw lioncub::ConfigError("--transport socket requires --rank");
    lioncub::SocketOptions so;
    so.host = a.host;
    so.base_port = a.port;
    so.connect_timeout = std::chrono::milliseconds(cfg.timeout_ms);
    lioncub::Communicator comm(
        lioncub::connect_socket_transport(*a.rank, cfg.world, so),
        std::chrono::milliseconds(cfg.timeout_ms));
    report = lioncub::run_worker(cfg, comm);
    lioncub::barrier(comm);
    if (*a.rank != 0) return kExitOk;
  } else {
    throw lioncub::ConfigError("--transport must be inproc or socket");
  }

  ensure_dir(a.out);
  std::ofstream csv(fs::path(a.out) / "metrics.csv");
  report.write_csv(csv);
  std::ofstream js(fs::path(a.out) / "report.json");
  js << report.to_json().dump(2) << '\n';
  std::cout << "final_loss=" << report.final_loss
            << " mean_tie_rate=" << report.mean_tie_rate
            << " mean_sign_match=" << report.mean_sign_match
            << " mean_flip_rate=" << report.mean_flip_rate << '\n';
  return kExitOk;
}

int cmd_quant_bench(const std::string& config, const std::string& out,
                    std::optional<std::uint64_t> seed) {
  json j = read_config(config);
  if (seed) j["seed"] = *seed;
  const auto cfg = lioncub::QuantBenchConfig::from_json(j);
  const auto rows = lioncub::run_quant_bench(cfg);
  ensure_dir(out);
  std::ofstream csv(fs::path(out) / "quant_bench.csv");
  lioncub::write_quant_bench_csv(csv, rows);
  lioncub::write_quant_bench_csv(std::cout, rows);
  return kExitOk;
}

struct CostArgs {
  std::vector<double> workers = {2, 4, 8, 16, 32, 64};
  std::vector<double> params = {1e6, 1e8};
  std::vector<double> alphas = {0, 1e-6, 1e-5, 1e-4};
  std::vector<double> betas = {1e-11, 1e-10, 1e-9};
  double word_bits = 32;
  std::string out;
};

int cmd_costmodel(const CostArgs& a) {
  lioncub::costmodel::Grid g{a.workers, a.params, a.alphas, a.betas, a.word_bits};
  const auto rows = lioncub::costmodel::sweep(g);
  if (a.out.empty()) {
    lioncub::costmodel::write_csv(std::cout, rows);
  } else {
    std::ofstream f(a.out);
    if (!f) throw lioncub::ConfigError("cannot write " + a.out);
    lioncub::costmodel::write_csv(f, rows);
  }
  return kExitOk;
}

int cmd_selftest(const std::string& inject) {
  lioncub::SelftestOptions opts;
  if (inject == "pack") {
    opts.inject_pack_fault = true;
  } else if (!inject.empty()) {
    throw lioncub::ConfigError("--inject-fault accepts only 'pack'");
  }
  bool ok = true;
  for (const auto& r : lioncub::run_selftest(opts)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.passed) std::cout << ": " << r.detail;
    std::cout << '\n';
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Communication-efficient distributed Lion experiments"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "run the distributed toy training workload");
  train_cmd->add_option("--config", train.config, "run config JSON");
  train_cmd->add_option("--out", train.out, "output directory");
  train_cmd->add_option("--seed", train.seed, "base seed (overrides config)");
  train_cmd->add_option("--transport", train.transport, "inproc or socket")
      ->check(CLI::IsMember({"inproc", "socket"}));
  train_cmd->add_option("--world", train.world, "number of workers (overrides config)");
  train_cmd->add_option("--rank", train.rank, "this process's rank (socket transport)");
  train_cmd->add_option("--port", train.port, "base TCP port; rank r listens on port + r");
  train_cmd->add_option("--host", train.host, "address of the peers");

  std::string bench_config, bench_out = "out";
  std::optional<std::uint64_t> bench_seed;
  auto* bench_cmd = app.add_subcommand("quant-bench", "sign match/flip rates of quantizers");
  bench_cmd->add_option("--config", bench_config, "benchmark config JSON");
  bench_cmd->add_option("--out", bench_out, "output directory");
  bench_cmd->add_option("--seed", bench_seed, "seed (overrides config)");

  CostArgs cost;
  auto* cost_cmd = app.add_subcommand("costmodel", "alpha-beta cost sweep as CSV");
  cost_cmd->add_option("--workers", cost.workers, "worker counts P");
  cost_cmd->add_option("--params", cost.params, "parameter counts N");
  cost_cmd->add_option("--alpha", cost.alphas, "latencies (s)");
  cost_cmd->add_option("--beta", cost.betas, "inverse bandwidths (s/bit)");
  cost_cmd->add_option("--word-bits", cost.word_bits, "bits per word b");
  cost_cmd->add_option("--out", cost.out, "CSV path (default stdout)");

  std::string inject;
  auto* self_cmd = app.add_subcommand("selftest", "run built-in consistency checks");
  self_cmd->add_option("--inject-fault", inject, "negative control: 'pack'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train);
    if (*bench_cmd) return cmd_quant_bench(bench_config, bench_out, bench_seed);
    if (*cost_cmd) return cmd_costmodel(cost);
    if (*self_cmd) return cmd_selftest(inject);
  } catch (const lioncub::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const lioncub::CollectiveError& e) {
    std::cerr << "collective error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
