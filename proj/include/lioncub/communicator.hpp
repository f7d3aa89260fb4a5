// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <exception>
#include <memory>
#include <optional>
#include <thread>
#include <type_traits>
#include <span>
#include <string>
#include <vector>

#include "lioncub/transport.hpp"

namespace lioncub {

// One rank's view of the worker group. Every collective must be entered by
// all ranks in the same order; each call advances `generation`, which tags
// its messages so mismatched calls are detected instead of mixed up.
class Communicator {
 public:
  explicit Communicator(std::unique_ptr<Transport> transport,
                        std::chrono::milliseconds timeout =
                            std::chrono::seconds(30));

  int rank() const { return rank_; }
  int world_size() const { return world_size_; }
  std::uint64_t generation() const { return generation_; }
  std::chrono::milliseconds timeout() const { return timeout_; }
  void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }
  const Transport& transport() const { return *transport_; }

  // Starts a new collective; subsequent send/recv carry its generation and
  // report `phase` in errors.
  void begin(std::string phase);
  void set_phase(std::string phase) { phase_ = std::move(phase); }

  void send(int dest, std::int32_t tag, std::vector<std::uint8_t> payload);
  std::vector<std::uint8_t> recv(int source, std::int32_t tag);

 private:
  std::unique_ptr<Transport> transport_;
  int rank_;
  int world_size_;
  std::chrono::milliseconds timeout_;
  std::uint64_t generation_ = 0;
  std::string phase_ = "idle";
};

// Builds P communicators sharing one in-process hub.
std::vector<Communicator> make_inproc_group(
    int world_size,
    std::chrono::milliseconds timeout = std::chrono::seconds(30));

// Runs fn(comm) on one thread per rank of a fresh in-process group and
// returns the per-rank results. The first exception (lowest rank) is
// rethrown after every thread has finished.
template <typename Fn>
auto run_on_group(int world_size, Fn fn,
                  std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
  using R = std::invoke_result_t<Fn&, Communicator&>;
  auto group = make_inproc_group(world_size, timeout);
  std::vector<std::optional<R>> results(static_cast<std::size_t>(world_size));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(world_size));
  std::vector<std::thread> threads;
  for (int r = 0; r < world_size; ++r) {
    threads.emplace_back([&, r] {
      try {
        results[r].emplace(fn(group[r]));
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

}  // namespace lioncub
