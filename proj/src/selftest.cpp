// SPDX-License-Identifier: Apache-2.0

#include "lioncub/selftest.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "lioncub/collectives.hpp"
#include "lioncub/packing.hpp"
#include "lioncub/quant.hpp"
#include "lioncub/workloads.hpp"

namespace lioncub {

namespace {

SelftestResult check(std::string name, const std::function<std::string()>& body) {
  SelftestResult r{std::move(name), false, {}};
  try {
    r.detail = body();
    r.passed = r.detail.empty();
  } catch (const std::exception& e) {
    r.detail = std::string("exception: ") + e.what();
  }
  return r;
}

std::string pack_roundtrip(bool inject_fault) {
  Rng rng(42);
  for (int width : {1, 2, 4, 8}) {
    const std::int32_t hi = (1 << width) - 1;
    std::vector<std::int32_t> v;
    if (width <= 4) {
      for (std::int32_t a = 0; a <= hi; ++a) {
        for (std::int32_t b = 0; b <= hi; ++b) {
          v.push_back(a);
          v.push_back(b);
        }
      }
    } else {
      for (int i = 0; i < 4099; ++i) v.push_back(static_cast<std::int32_t>(rng.next_u64() % 256));
    }
    const std::int32_t offset = hi / 2;
    for (auto& x : v) x -= offset;
    auto packed = pack(v, width, offset);
    if (inject_fault) packed.payload[0] ^= 0x01;
    const auto back = unpack(deserialize_packed(serialize(packed)));
    if (back != v) return "width " + std::to_string(width) + " roundtrip mismatch";
  }
  return {};
}

std::string sround_unbiased() {
  Rng rng(7);
  constexpr int kDraws = 100000;
  for (double v : {0.1, 0.25, 0.5, -0.7}) {
    double sum = 0.0;
    for (int i = 0; i < kDraws; ++i) sum += static_cast<double>(sround(v, rng));
    const double frac = v - std::floor(v);
    const double se = std::sqrt(frac * (1.0 - frac) / kDraws);
    if (std::abs(sum / kDraws - v) > 3.0 * se) {
      return "sround(" + std::to_string(v) + ") mean " + std::to_string(sum / kDraws);
    }
  }
  return {};
}

std::string collectives_vs_oracle(int p) {
  for (std::size_t n : {std::size_t{1}, std::size_t{7}, std::size_t{64}}) {
    Rng rng(derive_seed(99, {static_cast<std::uint64_t>(p), n}));
    std::vector<std::vector<std::int32_t>> signs(p), levels(p);
    std::vector<std::vector<double>> reals(p);
    for (int r = 0; r < p; ++r) {
      for (std::size_t j = 0; j < n; ++j) {
        signs[r].push_back(rng.uniform() < 0.5 ? -1 : 1);
        levels[r].push_back(static_cast<std::int32_t>(rng.next_u64() % 31) - 15);
        reals[r].push_back(rng.normal());
      }
    }
    std::vector<std::int32_t> sign_sum(n, 0), level_sum(n, 0), majority(n);
    std::vector<double> mean(n, 0.0);
    for (int r = 0; r < p; ++r) {
      for (std::size_t j = 0; j < n; ++j) {
        sign_sum[j] += signs[r][j];
        level_sum[j] += levels[r][j];
      }
    }
    const auto policy = SignPolicy::alternating(1);
    for (std::size_t j = 0; j < n; ++j) {
      majority[j] = sign_sum[j] > 0 ? 1 : (sign_sum[j] < 0 ? -1 : 1);
    }

    const auto results = run_on_group(p, [&](Communicator& comm) {
      const int r = comm.rank();
      std::vector<std::vector<std::int32_t>> out;
      out.push_back(ps_gather_broadcast(signs[r], comm, false).values);
      out.push_back(ps_gather_broadcast(signs[r], comm, true).values);
      DirectAllreduceOptions o;
      o.q_max = 15;
      out.push_back(direct_allreduce(levels[r], comm, o).values);
      std::vector<double> as_real(signs[r].begin(), signs[r].end());
      out.push_back(compressed_allreduce_1bit(as_real, comm, policy).values);
      return out;
    });
    for (int r = 0; r < p; ++r) {
      const auto& got = results[r];
      if (got[0] != sign_sum || got[1] != sign_sum) return "ps mismatch at n=" + std::to_string(n);
      if (got[2] != level_sum) return "direct mismatch at n=" + std::to_string(n);
      if (got[3] != majority) return "1-bit mismatch at n=" + std::to_string(n);
    }
  }
  return {};
}

std::string gradient_check() {
  const MlpDims dims{4, 5, 2};
  Rng rng(3);
  const auto model = init_mlp(dims, rng);
  const auto teacher = init_mlp(dims, rng);
  std::vector<double> x(8 * dims.in_dim);
  for (auto& v : x) v = rng.normal();
  const auto y = mlp_forward(teacher, dims, x);
  const auto lg = mlp_loss_and_grad(model, dims, x, y);
  double worst = 0.0;
  for (std::size_t l = 0; l < model.size(); ++l) {
    for (std::size_t j = 0; j < model[l].values.size(); ++j) {
      auto plus = model, minus = model;
      plus[l].values[j] += 1e-4;
      minus[l].values[j] -= 1e-4;
      const double fd =
          (mlp_loss(plus, dims, x, y) - mlp_loss(minus, dims, x, y)) / 2e-4;
      const double an = lg.grads[l].values[j];
      worst = std::max(worst, std::abs(fd - an) / std::max(1e-6, std::abs(fd) + std::abs(an)));
    }
  }
  if (worst >= 1e-4) return "max relative error " + std::to_string(worst);
  return {};
}

}  // namespace

std::vector<SelftestResult> run_selftest(const SelftestOptions& opts) {
  std::vector<SelftestResult> out;
  out.push_back(check("pack-roundtrip",
                      [&] { return pack_roundtrip(opts.inject_pack_fault); }));
  out.push_back(check("sround-unbiased", sround_unbiased));
  for (int p : opts.worlds) {
    out.push_back(check("collectives-oracle-P" + std::to_string(p),
                        [p] { return collectives_vs_oracle(p); }));
  }
  out.push_back(check("mlp-gradient", gradient_check));
  return out;
}

}  // namespace lioncub
