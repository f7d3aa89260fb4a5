// SPDX-License-Identifier: Apache-2.0

// Majority-vote aggregation algorithms over a Communicator. Every function is
// a synchronous collective: all ranks call it with equal-length inputs and
// all ranks return bit-identical results.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lioncub/communicator.hpp"
#include "lioncub/quant.hpp"

namespace lioncub {

struct VoteResult {
  // Signed aggregate sum_i Q(c_i), or the majority sign for the 1-bit path.
  std::vector<std::int32_t> values;
  std::int32_t range_min = 0;
  std::int32_t range_max = 0;
  // Elements whose signed aggregate was exactly 0 before any zero policy.
  std::size_t ties = 0;
};

// Gather to rank 0, sum, broadcast. `efficient` selects binomial trees for
// both phases instead of flat sends; results are identical. Inputs must lie
// in [-max_abs, max_abs].
VoteResult ps_gather_broadcast(std::span<const std::int32_t> values,
                               Communicator& comm, bool efficient,
                               std::int32_t max_abs = 1);

enum class VoteEncoding {
  // Inputs are +-1 and travel as 0/1; aggregate = 2 * sum01 - P.
  kSignBinary,
  // Inputs lie in [-q_max, q_max] and travel as q + q_max.
  kOffset,
};

struct DirectAllreduceOptions {
  VoteEncoding encoding = VoteEncoding::kOffset;
  std::int32_t q_max = 1;
  // Lane width of the summed representation; nullopt picks the smallest of
  // {8, 16, 32} that holds the largest possible sum. 2 and 4 are also
  // accepted when requested explicitly.
  std::optional<int> lane_bits;
};

// Largest stored sum P * (max stored value) for the encoding.
std::uint64_t direct_allreduce_max_sum(int world_size,
                                       const DirectAllreduceOptions& opts);
// Chosen lane width; throws ConfigError if the sum does not fit.
int direct_allreduce_lane(int world_size, const DirectAllreduceOptions& opts);

// Ring reduce-scatter + allgather on packed unsigned lanes. The capacity
// check runs before any communication.
VoteResult direct_allreduce(std::span<const std::int32_t> values,
                            Communicator& comm,
                            const DirectAllreduceOptions& opts);

// 1-bit compressed allreduce: sign with `policy`, all-to-all of 1-bit chunks
// (chunk j to rank j), local sum + majority sign, 1-bit allgather. Returns
// values in {-1, +1}; `ties` counts zero sums seen at the second stage.
VoteResult compressed_allreduce_1bit(std::span<const double> values,
                                     Communicator& comm,
                                     const SignPolicy& policy);

// Elementwise sign of the aggregate with zeros resolved by policy.
std::vector<std::int32_t> majority_sign(const VoteResult& agg,
                                        const SignPolicy& policy);

// Every rank's vector, in rank order.
std::vector<std::vector<double>> allgather(std::span<const double> values,
                                           Communicator& comm);

// Elementwise sum / mean across ranks, compensated and in rank order.
std::vector<double> allreduce_sum(std::span<const double> values,
                                  Communicator& comm);
std::vector<double> allreduce_mean(std::span<const double> values,
                                   Communicator& comm);

// Cheap rendezvous.
void barrier(Communicator& comm);

}  // namespace lioncub
