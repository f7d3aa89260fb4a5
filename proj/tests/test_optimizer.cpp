// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "lioncub/collectives.hpp"
#include "lioncub/errors.hpp"
#include "lioncub/optimizer.hpp"
#include "lioncub/rng.hpp"

using namespace lioncub;

namespace {

ParamSet single(std::vector<double> v, const std::string& name = "w") {
  ParamSet p;
  p.add(name, {v.size()});
  p[0].values = std::move(v);
  return p;
}

ParamSet two_layers(std::size_t a, std::size_t b) {
  ParamSet p;
  p.add("input", {a});
  p.add("head", {b});
  return p;
}

LionHyper hyper(double lr, double beta1 = 0.9, double beta2 = 0.99, double wd = 0.0) {
  LionHyper h;
  h.beta1 = beta1;
  h.beta2 = beta2;
  h.lr.base = lr;
  h.weight_decay = wd;
  return h;
}

ParamSet laplace_like(const ParamSet& shape, Rng& rng, double scale = 1.0) {
  ParamSet g = shape.zeros_like();
  for (auto& layer : g) {
    for (auto& v : layer.values) v = rng.laplace(scale);
  }
  return g;
}

}  // namespace

TEST_CASE("lion_step examples") {
  auto s = WorkerState::from_params(single({0.0}));
  lion_step(s, single({2.0}), hyper(0.1));
  CHECK(s.params[0].values[0] == doctest::Approx(-0.1));
  CHECK(s.momentum[0].values[0] == doctest::Approx(0.02));
  CHECK(s.iteration == 1);

  auto z = WorkerState::from_params(single({0.5, -3.0}));
  lion_step(z, single({0.0, 0.0}), hyper(0.1));
  CHECK(z.params[0].values == std::vector<double>{0.5, -3.0});

  auto d = WorkerState::from_params(single({1.0}));
  lion_step(d, single({0.0}), hyper(0.1, 0.9, 0.99, 0.1));
  CHECK(d.params[0].values[0] == doctest::Approx(0.99));

  CHECK_THROWS_AS(lion_step(d, single({0.0, 1.0}), hyper(0.1)), ConfigError);
  CHECK_THROWS_AS(lion_step(d, single({0.0}, "other"), hyper(0.1)), ConfigError);
}

TEST_CASE("literal decay reading grows the weights") {
  auto h = hyper(0.1, 0.9, 0.99, 0.1);
  h.decay_mode = DecayMode::kLiteral;
  auto s = WorkerState::from_params(single({1.0}));
  lion_step(s, single({0.0}), h);
  CHECK(s.params[0].values[0] == doctest::Approx(1.1));
}

TEST_CASE("hyperparameter validation") {
  CHECK_NOTHROW(hyper(0.1).validate());
  CHECK_THROWS_AS(hyper(0.1, 1.0).validate(), ConfigError);
  CHECK_THROWS_AS(hyper(0.1, 0.9, 0.0).validate(), ConfigError);
  CHECK_THROWS_AS(hyper(0.0).validate(), ConfigError);
  CHECK_THROWS_AS(hyper(0.1, 0.9, 0.99, -1.0).validate(), ConfigError);
  LrSchedule cos{LrSchedule::Kind::kCosine, 1.0, 0.1, 100};
  CHECK(cos.at(0) == doctest::Approx(1.0));
  CHECK(cos.at(50) == doctest::Approx(0.55));
  CHECK(cos.at(100) == doctest::Approx(0.1));
  CHECK(cos.at(1000) == doctest::Approx(0.1));
}

TEST_CASE("vote algorithm names") {
  for (auto a : {VoteAlgo::kParameterServer, VoteAlgo::kParameterServerTree, VoteAlgo::kDirect,
                 VoteAlgo::kCompressed1Bit}) {
    CHECK(parse_vote_algo(to_string(a)) == a);
  }
  CHECK_THROWS_AS(parse_vote_algo("ring"), ConfigError);
}

TEST_CASE("signsgd_majority_step examples") {
  const std::vector<double> g = {1.0, 1.0, -1.0};
  for (auto algo : {VoteAlgo::kParameterServer, VoteAlgo::kDirect, VoteAlgo::kCompressed1Bit}) {
    auto r = run_on_group(3, [&](Communicator& c) {
      auto s = WorkerState::from_params(single({0.0}));
      signsgd_majority_step(s, single({g[c.rank()]}), hyper(0.25), c, algo);
      return s.params[0].values[0];
    });
    CHECK(r == std::vector<double>{-0.25, -0.25, -0.25});
  }
  auto one = run_on_group(1, [&](Communicator& c) {
    auto s = WorkerState::from_params(single({0.0, 0.0}));
    signsgd_majority_step(s, single({0.3, -2.0}), hyper(0.5), c, VoteAlgo::kDirect);
    return s.params[0].values;
  });
  CHECK(one[0] == std::vector<double>{-0.5, 0.5});
}

TEST_CASE("signsgd_majority_step matches a majority oracle") {
  const int P = 5;
  Rng data(3);
  std::vector<ParamSet> grads;
  for (int r = 0; r < P; ++r) grads.push_back(laplace_like(two_layers(17, 5), data));
  auto res = run_on_group(P, [&](Communicator& c) {
    auto s = WorkerState::from_params(two_layers(17, 5));
    signsgd_majority_step(s, grads[c.rank()], hyper(1.0), c, VoteAlgo::kParameterServerTree);
    return s.params;
  });
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t j = 0; j < grads[0][l].values.size(); ++j) {
      int votes = 0;
      for (const auto& g : grads) votes += g[l].values[j] > 0 ? 1 : -1;
      CHECK(res[0][l].values[j] == (votes > 0 ? -1.0 : 1.0));
    }
  }
}

TEST_CASE("one worker with identity aggregation reduces to lion_step") {
  Rng data(8);
  const ParamSet shape = two_layers(40, 3);
  std::vector<ParamSet> grads;
  for (int t = 0; t < 30; ++t) {
    auto g = laplace_like(shape, data);
    g[0].values[t % 40] = 0.0;  // exact zeros in c at t = 1
    grads.push_back(std::move(g));
  }
  auto h = hyper(0.01, 0.9, 0.99, 0.05);

  auto ref = WorkerState::from_params(shape);
  for (const auto& g : grads) lion_step(ref, g, h);

  auto got = run_on_group(1, [&](Communicator& c) {
    auto s = WorkerState::from_params(shape);
    DistributedOptions opts;
    opts.zero_mode = SignMode::kExactTernary;
    Rng rng(1);
    for (const auto& g : grads) distributed_lion_step(s, g, h, opts, c, rng);
    return s;
  });
  CHECK(got[0].params == ref.params);
  CHECK(got[0].momentum == ref.momentum);
}

TEST_CASE("identical gradients on two workers reproduce single-worker Lion") {
  Rng data(9);
  const ParamSet shape = two_layers(64, 4);
  std::vector<ParamSet> grads;
  for (int t = 0; t < 25; ++t) grads.push_back(laplace_like(shape, data));
  const auto h = hyper(0.02);

  auto ref = WorkerState::from_params(shape);
  for (const auto& g : grads) lion_step(ref, g, h);

  SyncPolicy every{1, SyncPolicy::Selector::kAll, {}};
  auto got = run_on_group(2, [&](Communicator& c) {
    auto s = WorkerState::from_params(shape);
    DistributedOptions opts;
    Rng rng(1);
    for (const auto& g : grads) {
      distributed_lion_step(s, g, h, opts, c, rng);
      maybe_sync_momentum(s, every, c);
    }
    return s;
  });
  for (const auto& s : got) {
    CHECK(s.params == ref.params);
    CHECK(s.momentum == ref.momentum);
  }
}

TEST_CASE("opposite signs on two workers take the tie path") {
  for (auto algo : {VoteAlgo::kDirect, VoteAlgo::kParameterServer, VoteAlgo::kCompressed1Bit}) {
    CAPTURE(to_string(algo));
    auto got = run_on_group(2, [&](Communicator& c) {
      auto s = WorkerState::from_params(single({0.0}));
      DistributedOptions opts;
      opts.algo = algo;
      opts.quant = QuantSpec::sign();
      Rng rng(1);
      const double g = c.rank() == 0 ? 1.0 : -1.0;
      auto st = distributed_lion_step(s, single({g}), hyper(0.5), opts, c, rng);
      std::vector<double> out = {s.params[0].values[0], st.direction[0].values[0],
                                 static_cast<double>(st.ties)};
      st = distributed_lion_step(s, single({g}), hyper(0.5), opts, c, rng);
      out.push_back(st.direction[0].values[0]);
      out.push_back(s.params[0].values[0]);
      return out;
    });
    // t = 1 is odd: tie resolves to +1, t = 2 resolves to -1.
    CHECK(got[0] == std::vector<double>{-0.5, 1.0, 1.0, -1.0, 0.0});
    CHECK(got[1] == got[0]);
  }
}

TEST_CASE("8-bit L1 quantization agrees with the full-precision sign") {
  const int P = 8;
  const ParamSet shape = single(std::vector<double>(20000, 0.0));
  Rng data(21);
  std::vector<ParamSet> grads;
  for (int r = 0; r < P; ++r) grads.push_back(laplace_like(shape, data));
  const auto h = hyper(1e-3);
  auto dirs = run_on_group(P, [&](Communicator& c) {
    auto s = WorkerState::from_params(shape);
    DistributedOptions opts;
    opts.quant = QuantSpec::lp(8, 1.0);
    Rng rng(2);
    return distributed_lion_step(s, grads[c.rank()], h, opts, c, rng).direction[0].values;
  });
  std::size_t match = 0;
  const auto n = dirs[0].size();
  for (std::size_t j = 0; j < n; ++j) {
    double sum = 0;
    for (const auto& g : grads) sum += (1.0 - h.beta1) * g[0].values[j];
    match += (sum > 0 ? 1.0 : -1.0) == dirs[0][j];
  }
  CHECK(static_cast<double>(match) / n >= 0.9);
}

TEST_CASE("parameters stay bit-identical across workers") {
  const int P = 4;
  const ParamSet shape = two_layers(300, 7);
  struct Case {
    VoteAlgo algo;
    std::optional<QuantSpec> quant;
  };
  QuantSpec stochastic = QuantSpec::linf(4);
  const std::vector<Case> cases = {
      {VoteAlgo::kDirect, QuantSpec::lp(8, 1.0)},     {VoteAlgo::kDirect, QuantSpec::lp(4, 0.0)},
      {VoteAlgo::kParameterServer, stochastic},       {VoteAlgo::kParameterServerTree, QuantSpec::sign()},
      {VoteAlgo::kCompressed1Bit, QuantSpec::sign()}, {VoteAlgo::kDirect, std::nullopt}};
  SyncPolicy head{5, SyncPolicy::Selector::kNamed, {"head"}};
  for (const auto& cs : cases) {
    auto prints = run_on_group(P, [&](Communicator& c) {
      auto s = WorkerState::from_params(shape);
      DistributedOptions opts;
      opts.algo = cs.algo;
      opts.quant = cs.quant;
      // Different quantization streams on every rank.
      Rng rng(100 + c.rank());
      std::vector<std::uint64_t> fp;
      for (int t = 0; t < 20; ++t) {
        Rng g(derive_seed(7, {static_cast<std::uint64_t>(c.rank()), static_cast<std::uint64_t>(t)}));
        distributed_lion_step(s, laplace_like(shape, g), hyper(0.01), opts, c, rng);
        maybe_sync_momentum(s, head, c);
        fp.push_back(s.params.fingerprint());
      }
      return fp;
    });
    for (int r = 1; r < P; ++r) CHECK(prints[r] == prints[0]);
  }
}

TEST_CASE("equal betas make Lion sign descent with momentum") {
  Rng data(4);
  const double beta = 0.8, lr = 0.125;
  auto s = WorkerState::from_params(single(std::vector<double>(50, 0.0)));
  std::vector<double> m(50, 0.0), theta(50, 0.0);
  for (int t = 0; t < 40; ++t) {
    auto g = laplace_like(s.params, data);
    lion_step(s, g, hyper(lr, beta, beta));
    for (std::size_t j = 0; j < m.size(); ++j) {
      m[j] = beta * m[j] + (1.0 - beta) * g[0].values[j];
      theta[j] -= lr * (m[j] > 0 ? 1.0 : (m[j] < 0 ? -1.0 : 0.0));
    }
  }
  CHECK(s.params[0].values == theta);
  CHECK(s.momentum[0].values == m);
}

TEST_CASE("scaling every gradient leaves the step direction unchanged") {
  const int P = 4;
  const ParamSet shape = single(std::vector<double>(500, 0.0));
  auto run = [&](double scale, int steps, double p) {
    return run_on_group(P, [&](Communicator& c) {
      auto s = WorkerState::from_params(shape);
      DistributedOptions opts;
      opts.quant = QuantSpec::lp(8, p);
      Rng rng(1);
      std::vector<std::vector<double>> dirs;
      for (int t = 0; t < steps; ++t) {
        Rng g(derive_seed(11, {static_cast<std::uint64_t>(c.rank()), static_cast<std::uint64_t>(t)}));
        auto grad = laplace_like(shape, g);
        for (auto& v : grad[0].values) v *= scale;
        dirs.push_back(distributed_lion_step(s, grad, hyper(0.01), opts, c, rng).direction[0].values);
      }
      return dirs;
    })[0];
  };
  for (double p : {0.0, 1.0, 2.0}) {
    const auto base = run(1.0, 10, p);
    for (double c : {0.5, 4.0, 1024.0}) CHECK(run(c, 10, p) == base);
    CHECK(run(3.7, 1, p)[0] == base[0]);
  }
}

TEST_CASE("zero aggregates in consecutive steps cancel") {
  // Two workers with mirrored gradients keep a zero aggregate at every step.
  auto got = run_on_group(2, [&](Communicator& c) {
    auto s = WorkerState::from_params(single({0.0, 0.0}));
    DistributedOptions opts;
    opts.quant = QuantSpec::lp(8, 1.0);
    Rng rng(3);
    const double sgn = c.rank() == 0 ? 1.0 : -1.0;
    std::vector<std::vector<double>> out;
    for (int t = 0; t < 6; ++t) {
      const auto before = s.params[0].values;
      auto st = distributed_lion_step(s, single({sgn * 0.3, sgn * 2.0}), hyper(0.25), opts, c, rng);
      out.push_back(st.direction[0].values);
      out.push_back(s.params[0].values);
      (void)before;
    }
    return out;
  });
  const auto& o = got[0];
  for (int t = 0; t + 1 < 6; ++t) {
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(o[2 * t][j] + o[2 * (t + 1)][j] == 0.0);
    }
  }
  // After an even number of steps the parameters are back where they started.
  CHECK(o[3] == std::vector<double>{0.0, 0.0});
  CHECK(o[11] == std::vector<double>{0.0, 0.0});
}

TEST_CASE("masked coordinates are not voted on") {
  auto got = run_on_group(2, [&](Communicator& c) {
    auto s = WorkerState::from_params(single({0.0, 0.0, 0.0}));
    DistributedOptions opts;
    opts.quant = QuantSpec::lp(8, 1.0);
    opts.zero_mode = SignMode::kExactTernary;
    opts.masks["w"] = {true, false, true};
    Rng rng(3);
    distributed_lion_step(s, single({1.0, 5.0, -1.0}), hyper(0.5), opts, c, rng);
    return s.params[0].values;
  });
  CHECK(got[0] == std::vector<double>{-0.5, 0.0, 0.5});
  CHECK_THROWS_AS(run_on_group(1,
                               [&](Communicator& c) {
                                 auto s = WorkerState::from_params(single({0.0}));
                                 DistributedOptions opts;
                                 opts.masks["w"] = {true, false};
                                 Rng rng(1);
                                 distributed_lion_step(s, single({1.0}), hyper(0.5), opts, c, rng);
                                 return 0;
                               }),
                  ConfigError);
}

TEST_CASE("compressed path requires the sign quantizer and alternating zeros") {
  auto g = make_inproc_group(1);
  auto s = WorkerState::from_params(single({0.0}));
  Rng rng(1);
  DistributedOptions opts;
  opts.algo = VoteAlgo::kCompressed1Bit;
  opts.quant = QuantSpec::lp(8, 1.0);
  CHECK_THROWS_AS(distributed_lion_step(s, single({1.0}), hyper(0.1), opts, g[0], rng), ConfigError);
  opts.quant = QuantSpec::sign();
  opts.zero_mode = SignMode::kExactTernary;
  CHECK_THROWS_AS(distributed_lion_step(s, single({1.0}), hyper(0.1), opts, g[0], rng), ConfigError);
}

TEST_CASE("direct path reports lane overflow as a config error") {
  auto g = make_inproc_group(1);
  auto s = WorkerState::from_params(single({0.0}));
  Rng rng(1);
  DistributedOptions opts;
  opts.quant = QuantSpec::lp(8, 1.0);
  opts.lane_bits = 4;
  CHECK_THROWS_AS(distributed_lion_step(s, single({1.0}), hyper(0.1), opts, g[0], rng), ConfigError);
}

TEST_CASE("maybe_sync_momentum examples") {
  auto run = [](SyncPolicy policy, std::uint64_t iteration) {
    return run_on_group(2, [&](Communicator& c) {
      ParamSet p = two_layers(1, 1);
      auto s = WorkerState::from_params(p);
      s.iteration = iteration;
      const double v = c.rank() == 0 ? 1.0 : 3.0;
      s.momentum[0].values = {v};
      s.momentum[1].values = {v};
      const auto n = maybe_sync_momentum(s, policy, c);
      return std::vector<double>{s.momentum[0].values[0], s.momentum[1].values[0],
                                 static_cast<double>(n)};
    });
  };
  CHECK(run({0, SyncPolicy::Selector::kAll, {}}, 10)[0] == std::vector<double>{1, 1, 0});
  CHECK(run({10, SyncPolicy::Selector::kAll, {}}, 10)[1] == std::vector<double>{2, 2, 2});
  CHECK(run({10, SyncPolicy::Selector::kAll, {}}, 7)[1] == std::vector<double>{3, 3, 0});
  const auto head = run({10, SyncPolicy::Selector::kNamed, {"head"}}, 10);
  CHECK(head[0] == std::vector<double>{1, 2, 1});
  CHECK(head[1] == std::vector<double>{3, 2, 1});
  CHECK(run({10, SyncPolicy::Selector::kNone, {}}, 10)[0] == std::vector<double>{1, 1, 0});

  SyncPolicy p{10, SyncPolicy::Selector::kAll, {}};
  CHECK(p.fires(20));
  CHECK_FALSE(p.fires(25));
  CHECK_FALSE(SyncPolicy{}.fires(0));
}

TEST_CASE("momentum_divergence examples") {
  ParamSet a = two_layers(3, 2);
  for (auto& l : a) {
    for (auto& v : l.values) v = 0.7;
  }
  CHECK(momentum_divergence({a, a, a}) == std::vector<double>{0.0, 0.0});

  const std::vector<ParamSet> pair = {single({1.0}), single({3.0})};
  CHECK(momentum_divergence(pair) == std::vector<double>{1.0});

  // Brute-force population std, maximum over elements.
  Rng data(12);
  std::vector<ParamSet> ms;
  for (int r = 0; r < 5; ++r) ms.push_back(laplace_like(two_layers(20, 3), data));
  const auto got = momentum_divergence(ms);
  for (std::size_t l = 0; l < 2; ++l) {
    double best = 0;
    for (std::size_t j = 0; j < ms[0][l].values.size(); ++j) {
      double mean = 0, sq = 0;
      for (const auto& m : ms) mean += m[l].values[j] / 5;
      for (const auto& m : ms) sq += (m[l].values[j] - mean) * (m[l].values[j] - mean) / 5;
      best = std::max(best, std::sqrt(sq));
    }
    CHECK(got[l] == doctest::Approx(best).epsilon(1e-12));
  }

  auto dist = run_on_group(5, [&](Communicator& c) {
    auto s = WorkerState::from_params(two_layers(20, 3));
    s.momentum = ms[c.rank()];
    return momentum_divergence(s, c);
  });
  for (const auto& d : dist) {
    CHECK(d[0] == doctest::Approx(got[0]).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(got[1]).epsilon(1e-12));
  }
}
