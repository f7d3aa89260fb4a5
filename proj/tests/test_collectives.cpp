// SPDX-License-Identifier: Apache-2.0

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "doctest.h"
#include "lioncub/collectives.hpp"
#include "lioncub/communicator.hpp"
#include "lioncub/errors.hpp"
#include "lioncub/rng.hpp"

using namespace lioncub;
using namespace std::chrono_literals;

namespace {

using IVec = std::vector<std::int32_t>;
using DVec = std::vector<double>;

std::vector<IVec> random_ints(int P, std::size_t n, std::int32_t q_max, std::uint64_t seed,
                              bool signs_only = false) {
  Rng rng(seed);
  std::vector<IVec> out(P, IVec(n));
  const auto span = static_cast<std::uint64_t>(2 * q_max + 1);
  for (auto& v : out) {
    for (auto& x : v) {
      if (signs_only) {
        x = (rng.next_u64() & 1) ? 1 : -1;
      } else {
        x = static_cast<std::int32_t>(rng.next_u64() % span) - q_max;
      }
    }
  }
  return out;
}

std::vector<DVec> random_reals(int P, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DVec> out(P, DVec(n));
  for (auto& v : out) {
    for (auto& x : v) {
      // Some exact zeros so the policy path is exercised.
      x = (rng.next_u64() % 8 == 0) ? 0.0 : rng.normal();
    }
  }
  return out;
}

IVec oracle_sum(const std::vector<IVec>& inputs) {
  IVec s(inputs[0].size(), 0);
  for (const auto& v : inputs) {
    for (std::size_t j = 0; j < v.size(); ++j) s[j] += v[j];
  }
  return s;
}

std::size_t oracle_ties(const IVec& s) {
  std::size_t t = 0;
  for (auto v : s) t += (v == 0);
  return t;
}

IVec oracle_sign(const std::vector<DVec>& inputs, const SignPolicy& policy) {
  std::vector<IVec> signs;
  for (const auto& v : inputs) signs.push_back(apply_sign(v, policy));
  const IVec s = oracle_sum(signs);
  return apply_sign(std::span<const std::int32_t>(s), policy);
}

template <typename T>
void check_symmetric(const std::vector<T>& per_rank) {
  for (std::size_t r = 1; r < per_rank.size(); ++r) {
    REQUIRE(per_rank[r].values == per_rank[0].values);
    REQUIRE(per_rank[r].ties == per_rank[0].ties);
  }
}

}  // namespace

TEST_CASE("ps_gather_broadcast examples") {
  for (bool efficient : {false, true}) {
    const std::vector<IVec> a = {{1}, {-1}};
    auto r = run_on_group(2, [&](Communicator& c) {
      return ps_gather_broadcast(a[c.rank()], c, efficient);
    });
    CHECK(r[0].values == IVec{0});
    CHECK(r[0].ties == 1);
    check_symmetric(r);

    const std::vector<IVec> b = {{1}, {1}, {-1}};
    auto r3 = run_on_group(3, [&](Communicator& c) {
      return ps_gather_broadcast(b[c.rank()], c, efficient);
    });
    CHECK(r3[0].values == IVec{1});
    check_symmetric(r3);

    const auto in = random_ints(4, 500, 1, 3, true);
    auto r4 = run_on_group(4, [&](Communicator& c) {
      return ps_gather_broadcast(in[c.rank()], c, efficient);
    });
    CHECK(r4[0].values == oracle_sum(in));
    check_symmetric(r4);
  }
}

TEST_CASE("direct_allreduce examples") {
  const std::vector<IVec> signs = {{1}, {1}, {-1}, {-1}};
  DirectAllreduceOptions bin{VoteEncoding::kSignBinary, 1, std::nullopt};
  auto r = run_on_group(4, [&](Communicator& c) {
    return direct_allreduce(signs[c.rank()], c, bin);
  });
  CHECK(r[0].values == IVec{0});
  CHECK(r[0].ties == 1);
  check_symmetric(r);

  const auto q = random_ints(8, 333, 15, 8);
  DirectAllreduceOptions l1{VoteEncoding::kOffset, 15, 8};
  CHECK(direct_allreduce_max_sum(8, l1) == 240);
  CHECK(direct_allreduce_lane(8, l1) == 8);
  auto r8 = run_on_group(8, [&](Communicator& c) {
    return direct_allreduce(q[c.rank()], c, l1);
  });
  CHECK(r8[0].values == oracle_sum(q));
  CHECK(r8[0].range_min == -120);
  CHECK(r8[0].range_max == 120);
  check_symmetric(r8);
}

TEST_CASE("direct_allreduce capacity check at 125 workers") {
  DirectAllreduceOptions bin{VoteEncoding::kSignBinary, 1, 8};
  CHECK(direct_allreduce_lane(125, bin) == 8);
  DirectAllreduceOptions wide{VoteEncoding::kOffset, 15, 8};
  try {
    direct_allreduce_lane(125, wide);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("exceeds the representable value range") !=
          std::string::npos);
  }
  // The check fires before any message is sent: a single rank of a larger
  // group fails immediately instead of timing out.
  auto group = make_inproc_group(2, 50ms);
  DirectAllreduceOptions tiny{VoteEncoding::kOffset, 15, 4};
  const IVec v = {1};
  CHECK_THROWS_AS(direct_allreduce(v, group[0], tiny), ConfigError);
  // Auto lane widening.
  DirectAllreduceOptions autow{VoteEncoding::kOffset, 15, std::nullopt};
  CHECK(direct_allreduce_lane(125, autow) == 16);
}

TEST_CASE("compressed_allreduce_1bit examples") {
  const std::vector<DVec> a = {{3.0}, {-1.0}};
  auto r = run_on_group(2, [&](Communicator& c) {
    return compressed_allreduce_1bit(a[c.rank()], c, SignPolicy::alternating(1));
  });
  CHECK(r[0].values == IVec{1});
  CHECK(r[0].ties == 1);
  check_symmetric(r);
  auto even = run_on_group(2, [&](Communicator& c) {
    return compressed_allreduce_1bit(a[c.rank()], c, SignPolicy::alternating(2));
  });
  CHECK(even[0].values == IVec{-1});

  const std::vector<DVec> b = {{1}, {1}, {-2}};
  auto r3 = run_on_group(3, [&](Communicator& c) {
    return compressed_allreduce_1bit(b[c.rank()], c, SignPolicy::alternating(1));
  });
  CHECK(r3[0].values == IVec{1});

  auto g = make_inproc_group(1);
  const DVec z = {0.0};
  CHECK_THROWS_AS(compressed_allreduce_1bit(z, g[0], SignPolicy::ternary()), ConfigError);
}

TEST_CASE("majority_sign examples") {
  VoteResult agg;
  agg.values = {2, 0, -5};
  CHECK(majority_sign(agg, SignPolicy::alternating(3)) == IVec{1, 1, -1});
  agg.values = {0};
  CHECK(majority_sign(agg, SignPolicy::alternating(4)) == IVec{-1});
  // Only zero aggregates change between consecutive iterations.
  Rng rng(1);
  agg.values.assign(1000, 0);
  for (auto& v : agg.values) v = static_cast<std::int32_t>(rng.next_u64() % 9) - 4;
  const auto odd = majority_sign(agg, SignPolicy::alternating(7));
  const auto nxt = majority_sign(agg, SignPolicy::alternating(8));
  for (std::size_t j = 0; j < agg.values.size(); ++j) {
    CHECK((odd[j] != nxt[j]) == (agg.values[j] == 0));
  }
}

TEST_CASE("allreduce_mean examples") {
  const std::vector<DVec> a = {{1}, {3}};
  auto r = run_on_group(2, [&](Communicator& c) { return allreduce_mean(a[c.rank()], c); });
  CHECK(r[0] == DVec{2});
  CHECK(r[1] == DVec{2});
  const DVec same = {0.1, -7.25, 1e-300, 3.3};
  auto r4 = run_on_group(4, [&](Communicator& c) { return allreduce_mean(same, c); });
  for (const auto& v : r4) {
    for (std::size_t j = 0; j < same.size(); ++j) {
      CHECK(v[j] == doctest::Approx(same[j]).epsilon(1e-15));
    }
  }
}

namespace {

// Units in the last place between two doubles.
double ulp_distance(double a, double b) {
  if (a == b) return 0;
  const double ulp = std::nextafter(std::abs(b), INFINITY) - std::abs(b);
  return std::abs(a - b) / ulp;
}

}  // namespace

TEST_CASE("oracle equivalence across group sizes and lengths") {
  for (int P : {2, 3, 4, 8}) {
    for (std::size_t N : {1u, 7u, 64u, 1000u}) {
      CAPTURE(P);
      CAPTURE(N);
      const std::uint64_t seed = 1000 * P + N;
      const auto signs = random_ints(P, N, 1, seed, true);
      const auto ternary = random_ints(P, N, 1, seed + 1);
      const auto wide = random_ints(P, N, 127, seed + 2);
      const auto reals = random_reals(P, N, seed + 3);

      for (bool eff : {false, true}) {
        auto r = run_on_group(P, [&](Communicator& c) {
          return ps_gather_broadcast(ternary[c.rank()], c, eff);
        });
        REQUIRE(r[0].values == oracle_sum(ternary));
        REQUIRE(r[0].ties == oracle_ties(oracle_sum(ternary)));
        check_symmetric(r);
        auto rw = run_on_group(P, [&](Communicator& c) {
          return ps_gather_broadcast(wide[c.rank()], c, eff, 127);
        });
        REQUIRE(rw[0].values == oracle_sum(wide));
      }

      DirectAllreduceOptions bin{VoteEncoding::kSignBinary, 1, std::nullopt};
      auto rb = run_on_group(P, [&](Communicator& c) {
        return direct_allreduce(signs[c.rank()], c, bin);
      });
      REQUIRE(rb[0].values == oracle_sum(signs));
      REQUIRE(rb[0].ties == oracle_ties(oracle_sum(signs)));
      check_symmetric(rb);

      for (std::int32_t q_max : {1, 127}) {
        const auto& in = q_max == 1 ? ternary : wide;
        DirectAllreduceOptions off{VoteEncoding::kOffset, q_max, std::nullopt};
        auto ro = run_on_group(P, [&](Communicator& c) {
          return direct_allreduce(in[c.rank()], c, off);
        });
        REQUIRE(ro[0].values == oracle_sum(in));
        check_symmetric(ro);
      }

      for (std::uint64_t t : {1u, 2u}) {
        const auto policy = SignPolicy::alternating(t);
        auto rc = run_on_group(P, [&](Communicator& c) {
          return compressed_allreduce_1bit(reals[c.rank()], c, policy);
        });
        REQUIRE(rc[0].values == oracle_sign(reals, policy));
        check_symmetric(rc);
      }

      auto rm = run_on_group(P, [&](Communicator& c) { return allreduce_mean(reals[c.rank()], c); });
      for (std::size_t j = 0; j < N; ++j) {
        long double acc = 0;
        for (const auto& v : reals) acc += v[j];
        const double oracle = static_cast<double>(acc / P);
        REQUIRE(ulp_distance(rm[0][j], oracle) <= 2.0);
      }
      for (int r = 1; r < P; ++r) REQUIRE(rm[r] == rm[0]);
    }
  }
}

TEST_CASE("tie fraction matches the binomial formula") {
  constexpr std::size_t N = 100000;
  for (int P : {4, 8}) {
    const auto in = random_ints(P, N, 1, 42 + P, true);
    DirectAllreduceOptions bin{VoteEncoding::kSignBinary, 1, std::nullopt};
    auto r = run_on_group(P, [&](Communicator& c) {
      return direct_allreduce(in[c.rank()], c, bin);
    });
    // C(P, P/2) / 2^P
    double choose = 1;
    for (int k = 1; k <= P / 2; ++k) choose = choose * (P / 2 + k) / k;
    const double expected = choose / std::pow(2.0, P);
    CAPTURE(P);
    CHECK(expected == doctest::Approx(P == 4 ? 0.375 : 0.2734375));
    CHECK(std::abs(static_cast<double>(r[0].ties) / N - expected) <= 0.01);
  }
}

TEST_CASE("compressed_allreduce_1bit strips padding") {
  const int P = 4;
  for (std::size_t N : {1u, 2u, 3u, 5u, 13u, 1001u}) {
    const auto reals = random_reals(P, N, 900 + N);
    auto r = run_on_group(P, [&](Communicator& c) {
      return compressed_allreduce_1bit(reals[c.rank()], c, SignPolicy::alternating(2));
    });
    CHECK(r[0].values.size() == N);
    CHECK(r[0].values == oracle_sign(reals, SignPolicy::alternating(2)));
  }
}

TEST_CASE("a missing rank raises a collective error") {
  const IVec v = {1, -1};
  try {
    run_on_group(
        2,
        [&](Communicator& c) {
          if (c.rank() == 0) ps_gather_broadcast(v, c, false);
          return 0;
        },
        200ms);
    FAIL("expected CollectiveError");
  } catch (const CollectiveError& e) {
    CHECK(e.peer() == 1);
    CHECK(e.generation() == 1);
    CHECK(!e.phase().empty());
  }
}

TEST_CASE("mismatched lengths are rejected") {
  const std::vector<IVec> in = {{1, 1}, {1}};
  CHECK_THROWS(run_on_group(
      2, [&](Communicator& c) { return ps_gather_broadcast(in[c.rank()], c, false); }, 500ms));
}

TEST_CASE("results are deterministic across runs") {
  const auto reals = random_reals(3, 257, 5);
  auto once = [&] {
    return run_on_group(3, [&](Communicator& c) {
      return compressed_allreduce_1bit(reals[c.rank()], c, SignPolicy::alternating(3)).values;
    })[0];
  };
  CHECK(once() == once());
}

TEST_CASE("socket transport matches the in-process results") {
  const int P = 4;
  const auto ints = random_ints(P, 1000, 15, 61);
  const auto reals = random_reals(P, 1000, 62);
  struct Out {
    IVec ps, direct, onebit;
    DVec mean;
  };
  auto body = [&](Communicator& c) {
    Out o;
    o.ps = ps_gather_broadcast(ints[c.rank()], c, true, 15).values;
    o.direct = direct_allreduce(ints[c.rank()], c, {VoteEncoding::kOffset, 15, std::nullopt}).values;
    o.onebit = compressed_allreduce_1bit(reals[c.rank()], c, SignPolicy::alternating(5)).values;
    o.mean = allreduce_mean(reals[c.rank()], c);
    barrier(c);
    return o;
  };
  const auto local = run_on_group(P, body);

  SocketOptions opts;
  opts.base_port = 32000 + static_cast<int>(getpid() % 4000) * 4;
  opts.connect_timeout = 10000ms;
  std::vector<Out> remote(P);
  std::vector<std::exception_ptr> errs(P);
  std::vector<std::thread> threads;
  for (int r = 0; r < P; ++r) {
    threads.emplace_back([&, r] {
      try {
        Communicator c(connect_socket_transport(r, P, opts), 10000ms);
        remote[r] = body(c);
      } catch (...) {
        errs[r] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errs) REQUIRE_FALSE(e);
  for (int r = 0; r < P; ++r) {
    CHECK(remote[r].ps == local[0].ps);
    CHECK(remote[r].direct == local[0].direct);
    CHECK(remote[r].onebit == local[0].onebit);
    CHECK(remote[r].mean == local[0].mean);
  }
}
