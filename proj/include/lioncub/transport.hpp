// SPDX-License-Identifier: Apache-2.0

// Point-to-point message transports. A Transport is one rank's endpoint;
// messages between an ordered pair of ranks are delivered in FIFO order.

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lioncub {

struct Message {
  std::uint64_t generation = 0;
  std::int32_t source = 0;
  std::int32_t tag = 0;
  std::vector<std::uint8_t> payload;
};

class Transport {
 public:
  virtual ~Transport() = default;

  virtual int rank() const = 0;
  virtual int world_size() const = 0;
  virtual std::string name() const = 0;

  // Returns false if the message could not be queued before the deadline.
  virtual bool send(int dest, Message msg, std::chrono::milliseconds timeout) = 0;
  // Next message from `source`, or nullopt on timeout.
  virtual std::optional<Message> recv(int source,
                                      std::chrono::milliseconds timeout) = 0;
};

// Shared rendezvous for P in-process endpoints, one bounded FIFO channel per
// ordered (source, dest) pair. Endpoints keep the hub alive.
class InProcHub : public std::enable_shared_from_this<InProcHub> {
 public:
  static std::shared_ptr<InProcHub> create(int world_size,
                                           std::size_t channel_capacity = 64);

  std::unique_ptr<Transport> endpoint(int rank);

  int world_size() const { return world_size_; }

  struct Channel;

 private:
  InProcHub(int world_size, std::size_t capacity);

  int world_size_;
  std::size_t capacity_;
  std::vector<std::unique_ptr<Channel>> channels_;

  friend class InProcTransport;
};

struct SocketOptions {
  std::string host = "127.0.0.1";
  // Rank r listens on base_port + r; rank 0 therefore listens on base_port.
  int base_port = 29500;
  std::chrono::milliseconds connect_timeout{30000};
};

// Fully connected TCP mesh. Rank j connects to every rank i < j and sends its
// rank as a 4-byte little-endian header; rank i accepts from every j > i.
// Frames: u64 generation | i32 source | i32 tag | u32 length | payload.
std::unique_ptr<Transport> connect_socket_transport(int rank, int world_size,
                                                    const SocketOptions& opts);

}  // namespace lioncub
