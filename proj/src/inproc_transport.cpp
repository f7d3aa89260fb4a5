// SPDX-License-Identifier: Apache-2.0

#include <condition_variable>
#include <deque>
#include <mutex>

#include "lioncub/errors.hpp"
#include "lioncub/transport.hpp"

namespace lioncub {

struct InProcHub::Channel {
  std::mutex mu;
  std::condition_variable not_empty;
  std::condition_variable not_full;
  std::deque<Message> queue;
};

class InProcTransport final : public Transport {
 public:
  InProcTransport(std::shared_ptr<InProcHub> hub, int rank)
      : hub_(std::move(hub)), rank_(rank) {}

  int rank() const override { return rank_; }
  int world_size() const override { return hub_->world_size_; }
  std::string name() const override { return "inproc"; }

  bool send(int dest, Message msg, std::chrono::milliseconds timeout) override {
    auto& ch = channel(rank_, dest);
    std::unique_lock lock(ch.mu);
    if (!ch.not_full.wait_for(lock, timeout, [&] {
          return ch.queue.size() < hub_->capacity_;
        })) {
      return false;
    }
    ch.queue.push_back(std::move(msg));
    ch.not_empty.notify_one();
    return true;
  }

  std::optional<Message> recv(int source,
                              std::chrono::milliseconds timeout) override {
    auto& ch = channel(source, rank_);
    std::unique_lock lock(ch.mu);
    if (!ch.not_empty.wait_for(lock, timeout,
                               [&] { return !ch.queue.empty(); })) {
      return std::nullopt;
    }
    Message m = std::move(ch.queue.front());
    ch.queue.pop_front();
    ch.not_full.notify_one();
    return m;
  }

 private:
  InProcHub::Channel& channel(int src, int dst) {
    const int p = hub_->world_size_;
    if (src < 0 || src >= p || dst < 0 || dst >= p) {
      throw ConfigError("inproc transport: rank out of range");
    }
    return *hub_->channels_[static_cast<std::size_t>(src * p + dst)];
  }

  std::shared_ptr<InProcHub> hub_;
  int rank_;
};

InProcHub::InProcHub(int world_size, std::size_t capacity)
    : world_size_(world_size), capacity_(capacity) {
  channels_.reserve(static_cast<std::size_t>(world_size * world_size));
  for (int i = 0; i < world_size * world_size; ++i) {
    channels_.push_back(std::make_unique<Channel>());
  }
}

std::shared_ptr<InProcHub> InProcHub::create(int world_size,
                                             std::size_t channel_capacity) {
  if (world_size < 1) throw ConfigError("world size must be >= 1");
  if (channel_capacity < 1) throw ConfigError("channel capacity must be >= 1");
  return std::shared_ptr<InProcHub>(new InProcHub(world_size, channel_capacity));
}

std::unique_ptr<Transport> InProcHub::endpoint(int rank) {
  if (rank < 0 || rank >= world_size_) {
    throw ConfigError("endpoint rank out of range");
  }
  return std::make_unique<InProcTransport>(shared_from_this(), rank);
}

}  // namespace lioncub
