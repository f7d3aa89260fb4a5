// SPDX-License-Identifier: Apache-2.0

#include "lioncub/collectives.hpp"

#include <string>

#include "lioncub/errors.hpp"
#include "lioncub/packing.hpp"
#include "lioncub/wire.hpp"

namespace lioncub {

namespace {

// Tags distinguish the phases of one collective.
enum Tag : std::int32_t {
  kGather = 1,
  kBroadcast = 2,
  kReduceScatter = 3,
  kAllgather = 4,
  kAllToAll = 5,
  kBarrier = 6,
};

std::size_t chunk_begin(std::size_t n, int parts, int c) {
  return n * static_cast<std::size_t>(c) / static_cast<std::size_t>(parts);
}

int mod(int a, int p) { return ((a % p) + p) % p; }

[[noreturn]] void length_mismatch(const Communicator& comm, int peer) {
  throw CollectiveError("vector length differs between ranks",
                        comm.generation(), "length-check", peer);
}

std::size_t count_zeros(std::span<const std::int32_t> v) {
  std::size_t z = 0;
  for (auto x : v) z += (x == 0);
  return z;
}

void check_bounds(std::span<const std::int32_t> values, std::int32_t lo,
                  std::int32_t hi) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < lo || values[i] > hi) {
      throw RangeError("value " + std::to_string(values[i]) + " at index " +
                           std::to_string(i) + " outside [" +
                           std::to_string(lo) + ", " + std::to_string(hi) + "]",
                       i);
    }
  }
}

std::int32_t checked_range(int world_size, std::int32_t q_max) {
  const std::int64_t r = std::int64_t{world_size} * q_max;
  if (r > INT32_MAX) throw ConfigError("aggregate range exceeds int32");
  return static_cast<std::int32_t>(r);
}

// Binomial-tree gather of equal-length blocks to rank 0. Returns all blocks
// concatenated in rank order on rank 0, empty elsewhere.
std::vector<std::int32_t> tree_gather(std::span<const std::int32_t> mine,
                                      Communicator& comm) {
  const int p = comm.world_size();
  const int r = comm.rank();
  std::vector<std::int32_t> acc(mine.begin(), mine.end());
  for (int mask = 1; mask < p; mask <<= 1) {
    if (r & mask) {
      comm.send(r - mask, kGather, wire::encode_i32(acc));
      return {};
    }
    if (r + mask < p) {
      const auto blocks = wire::decode_i32(comm.recv(r + mask, kGather));
      const std::size_t expect_blocks =
          static_cast<std::size_t>(std::min(mask, p - (r + mask)));
      if (blocks.size() != expect_blocks * mine.size()) {
        length_mismatch(comm, r + mask);
      }
      acc.insert(acc.end(), blocks.begin(), blocks.end());
    }
  }
  return acc;
}

wire::Bytes tree_broadcast(wire::Bytes payload, Communicator& comm) {
  const int p = comm.world_size();
  const int r = comm.rank();
  int mask = 1;
  while (mask < p) {
    if (r & mask) {
      payload = comm.recv(r - mask, kBroadcast);
      break;
    }
    mask <<= 1;
  }
  mask >>= 1;
  while (mask > 0) {
    if (r + mask < p) comm.send(r + mask, kBroadcast, payload);
    mask >>= 1;
  }
  return payload;
}

}  // namespace

VoteResult ps_gather_broadcast(std::span<const std::int32_t> values,
                               Communicator& comm, bool efficient,
                               std::int32_t max_abs) {
  if (max_abs < 0) throw ConfigError("max_abs must be >= 0");
  check_bounds(values, -max_abs, max_abs);
  const int p = comm.world_size();
  const std::size_t n = values.size();

  comm.begin(efficient ? "ps.tree-gather" : "ps.flat-gather");
  std::vector<std::int32_t> gathered;
  if (efficient) {
    gathered = tree_gather(values, comm);
  } else if (comm.rank() == 0) {
    gathered.assign(values.begin(), values.end());
    for (int src = 1; src < p; ++src) {
      const auto v = wire::decode_i32(comm.recv(src, kGather));
      if (v.size() != n) length_mismatch(comm, src);
      gathered.insert(gathered.end(), v.begin(), v.end());
    }
  } else {
    comm.send(0, kGather, wire::encode_i32(values));
  }

  wire::Bytes result;
  if (comm.rank() == 0) {
    std::vector<std::int32_t> sum(n, 0);
    for (int w = 0; w < p; ++w) {
      for (std::size_t j = 0; j < n; ++j) sum[j] += gathered[w * n + j];
    }
    result = wire::encode_i32(sum);
  }

  comm.set_phase(efficient ? "ps.tree-broadcast" : "ps.flat-broadcast");
  if (efficient) {
    result = tree_broadcast(std::move(result), comm);
  } else if (comm.rank() == 0) {
    for (int dst = 1; dst < p; ++dst) comm.send(dst, kBroadcast, result);
  } else {
    result = comm.recv(0, kBroadcast);
  }

  VoteResult out;
  out.values = wire::decode_i32(result);
  if (out.values.size() != n) length_mismatch(comm, 0);
  out.range_max = checked_range(p, max_abs);
  out.range_min = -out.range_max;
  out.ties = count_zeros(out.values);
  return out;
}

std::uint64_t direct_allreduce_max_sum(int world_size,
                                       const DirectAllreduceOptions& opts) {
  const std::uint64_t stored_max =
      opts.encoding == VoteEncoding::kSignBinary
          ? 1u
          : 2u * static_cast<std::uint64_t>(opts.q_max);
  return static_cast<std::uint64_t>(world_size) * stored_max;
}

int direct_allreduce_lane(int world_size, const DirectAllreduceOptions& opts) {
  if (opts.q_max < 1) throw ConfigError("direct allreduce: q_max must be >= 1");
  if (opts.encoding == VoteEncoding::kSignBinary && opts.q_max != 1) {
    throw ConfigError("direct allreduce: sign-binary encoding requires q_max = 1");
  }
  const std::uint64_t need = direct_allreduce_max_sum(world_size, opts);
  auto fits = [&](int bits) {
    return need <= (bits >= 32 ? 0xFFFFFFFFull : (1ull << bits) - 1);
  };
  if (opts.lane_bits) {
    const int bits = *opts.lane_bits;
    if (bits != 2 && bits != 4 && bits != 8 && bits != 16 && bits != 32) {
      throw ConfigError("direct allreduce: lane width must be 2, 4, 8, 16 or 32");
    }
    if (!fits(bits)) {
      throw ConfigError(
          "direct allreduce: sum of " + std::to_string(world_size) +
          " workers up to " + std::to_string(need) +
          " exceeds the representable value range of a " +
          std::to_string(bits) + "-bit lane");
    }
    return bits;
  }
  for (int bits : {8, 16, 32}) {
    if (fits(bits)) return bits;
  }
  throw ConfigError("direct allreduce: sum exceeds a 32-bit lane");
}

VoteResult direct_allreduce(std::span<const std::int32_t> values,
                            Communicator& comm,
                            const DirectAllreduceOptions& opts) {
  const int p = comm.world_size();
  const int r = comm.rank();
  const int lane = direct_allreduce_lane(p, opts);
  const std::size_t n = values.size();

  std::vector<std::uint32_t> acc(n);
  if (opts.encoding == VoteEncoding::kSignBinary) {
    for (std::size_t j = 0; j < n; ++j) {
      if (values[j] != 1 && values[j] != -1) {
        throw RangeError("sign-binary input " + std::to_string(values[j]) +
                             " at index " + std::to_string(j) + " is not +-1",
                         j);
      }
      acc[j] = values[j] > 0 ? 1u : 0u;
    }
  } else {
    check_bounds(values, -opts.q_max, opts.q_max);
    for (std::size_t j = 0; j < n; ++j) {
      acc[j] = static_cast<std::uint32_t>(values[j] + opts.q_max);
    }
  }

  comm.begin("direct.reduce-scatter");
  const int next = mod(r + 1, p);
  const int prev = mod(r - 1, p);
  auto chunk = [&](int c) {
    const std::size_t b = chunk_begin(n, p, c);
    return std::span<std::uint32_t>(acc).subspan(b, chunk_begin(n, p, c + 1) - b);
  };
  auto send_chunk = [&](int c, Tag tag) {
    wire::Bytes bytes;
    pack_unsigned(chunk(c), lane, bytes);
    comm.send(next, tag, std::move(bytes));
  };
  auto recv_chunk = [&](int c, Tag tag) {
    const auto dst = chunk(c);
    const auto bytes = comm.recv(prev, tag);
    try {
      return unpack_unsigned(bytes, dst.size(), lane);
    } catch (const FormatError&) {
      length_mismatch(comm, prev);
    }
  };

  for (int s = 0; s < p - 1; ++s) {
    send_chunk(mod(r - s, p), kReduceScatter);
    const int c = mod(r - s - 1, p);
    const auto incoming = recv_chunk(c, kReduceScatter);
    auto dst = chunk(c);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += incoming[j];
  }

  comm.set_phase("direct.allgather");
  for (int s = 0; s < p - 1; ++s) {
    send_chunk(mod(r + 1 - s, p), kAllgather);
    const int c = mod(r - s, p);
    const auto incoming = recv_chunk(c, kAllgather);
    std::copy(incoming.begin(), incoming.end(), chunk(c).begin());
  }

  VoteResult out;
  out.values.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto sum = static_cast<std::int64_t>(acc[j]);
    out.values[j] = static_cast<std::int32_t>(
        opts.encoding == VoteEncoding::kSignBinary
            ? 2 * sum - p
            : sum - std::int64_t{p} * opts.q_max);
  }
  out.range_max = checked_range(p, opts.q_max);
  out.range_min = -out.range_max;
  out.ties = count_zeros(out.values);
  return out;
}

VoteResult compressed_allreduce_1bit(std::span<const double> values,
                                     Communicator& comm,
                                     const SignPolicy& policy) {
  if (policy.mode != SignMode::kAlternating) {
    throw ConfigError("1-bit allreduce cannot carry exact zeros; "
                      "use the alternating sign policy");
  }
  const int p = comm.world_size();
  const int r = comm.rank();
  const std::size_t n = values.size();
  const std::size_t per = (n + static_cast<std::size_t>(p) - 1) / p;
  const std::size_t padded = per * static_cast<std::size_t>(p);

  // Padding is +1 at every rank, so padded sums are P and never tie.
  std::vector<std::int32_t> signs = apply_sign(values, policy);
  signs.resize(padded, 1);

  auto chunk_of = [&](std::span<const std::int32_t> v, int c) {
    return v.subspan(static_cast<std::size_t>(c) * per, per);
  };
  auto decode_chunk = [&](const wire::Bytes& bytes, int peer) {
    PackedBits pb;
    pb.width = 1;
    pb.sign_map = true;
    pb.count = static_cast<std::uint32_t>(per);
    pb.payload = bytes;
    try {
      return unpack(pb);
    } catch (const FormatError&) {
      length_mismatch(comm, peer);
    }
  };

  // Stage 1: pairwise-exchange all-to-all; rank r ends up with every rank's
  // copy of chunk r.
  comm.begin("1bit.all-to-all");
  std::vector<std::int32_t> sums(chunk_of(signs, r).begin(),
                                 chunk_of(signs, r).end());
  for (int s = 1; s < p; ++s) {
    const int dst = mod(r + s, p);
    const int src = mod(r - s, p);
    comm.send(dst, kAllToAll, pack_signs(chunk_of(signs, dst)).payload);
    const auto contrib = decode_chunk(comm.recv(src, kAllToAll), src);
    for (std::size_t j = 0; j < per; ++j) sums[j] += contrib[j];
  }

  const std::size_t base = static_cast<std::size_t>(r) * per;
  std::uint32_t local_ties = 0;
  for (std::size_t j = 0; j < per; ++j) {
    if (base + j < n && sums[j] == 0) ++local_ties;
  }
  const auto majority = apply_sign(std::span<const std::int32_t>(sums), policy);

  // Stage 2: ring allgather of the 1-bit majority chunks plus tie counts.
  comm.set_phase("1bit.allgather");
  std::vector<std::int32_t> result(padded, 0);
  std::vector<std::uint32_t> ties(static_cast<std::size_t>(p), 0);
  std::copy(majority.begin(), majority.end(), result.begin() + base);
  ties[r] = local_ties;
  const int next = mod(r + 1, p);
  const int prev = mod(r - 1, p);
  for (int s = 0; s < p - 1; ++s) {
    const int c_send = mod(r - s, p);
    wire::Bytes msg;
    wire::put_le<std::uint32_t>(msg, ties[c_send]);
    const auto bits = pack_signs(chunk_of(result, c_send)).payload;
    msg.insert(msg.end(), bits.begin(), bits.end());
    comm.send(next, kAllgather, std::move(msg));

    const int c_recv = mod(r - s - 1, p);
    const auto in = comm.recv(prev, kAllgather);
    if (in.size() < 4) length_mismatch(comm, prev);
    ties[c_recv] = wire::get_le<std::uint32_t>(in, 0);
    const auto chunk =
        decode_chunk(wire::Bytes(in.begin() + 4, in.end()), prev);
    std::copy(chunk.begin(), chunk.end(),
              result.begin() + static_cast<std::ptrdiff_t>(c_recv * per));
  }

  VoteResult out;
  result.resize(n);
  out.values = std::move(result);
  out.range_min = -1;
  out.range_max = 1;
  for (auto t : ties) out.ties += t;
  return out;
}

std::vector<std::int32_t> majority_sign(const VoteResult& agg,
                                        const SignPolicy& policy) {
  return apply_sign(std::span<const std::int32_t>(agg.values), policy);
}

std::vector<std::vector<double>> allgather(std::span<const double> values,
                                           Communicator& comm) {
  const int p = comm.world_size();
  const int r = comm.rank();
  std::vector<std::vector<double>> blocks(static_cast<std::size_t>(p));
  blocks[r].assign(values.begin(), values.end());
  comm.begin("allgather");
  const int next = mod(r + 1, p);
  const int prev = mod(r - 1, p);
  for (int s = 0; s < p - 1; ++s) {
    comm.send(next, kAllgather, wire::encode_f64(blocks[mod(r - s, p)]));
    auto in = wire::decode_f64(comm.recv(prev, kAllgather));
    if (in.size() != values.size()) length_mismatch(comm, prev);
    blocks[mod(r - s - 1, p)] = std::move(in);
  }
  return blocks;
}

std::vector<double> allreduce_sum(std::span<const double> values,
                                  Communicator& comm) {
  const auto blocks = allgather(values, comm);
  std::vector<double> out(values.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    // Neumaier summation in rank order.
    double sum = 0.0;
    double comp = 0.0;
    for (const auto& b : blocks) {
      const double v = b[j];
      const double t = sum + v;
      comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
      sum = t;
    }
    out[j] = sum + comp;
  }
  return out;
}

std::vector<double> allreduce_mean(std::span<const double> values,
                                   Communicator& comm) {
  auto out = allreduce_sum(values, comm);
  const double p = static_cast<double>(comm.world_size());
  for (auto& v : out) v /= p;
  return out;
}

void barrier(Communicator& comm) {
  const int p = comm.world_size();
  if (p == 1) return;
  comm.begin("barrier");
  // Dissemination barrier.
  for (int d = 1; d < p; d <<= 1) {
    comm.send(mod(comm.rank() + d, p), kBarrier, {});
    comm.recv(mod(comm.rank() - d, p), kBarrier);
  }
}

}  // namespace lioncub
