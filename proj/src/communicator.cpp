// SPDX-License-Identifier: Apache-2.0

#include "lioncub/communicator.hpp"

#include "lioncub/errors.hpp"

namespace lioncub {

Communicator::Communicator(std::unique_ptr<Transport> transport,
                           std::chrono::milliseconds timeout)
    : transport_(std::move(transport)),
      rank_(transport_->rank()),
      world_size_(transport_->world_size()),
      timeout_(timeout) {
  if (world_size_ < 1 || rank_ < 0 || rank_ >= world_size_) {
    throw ConfigError("communicator: invalid rank/world size");
  }
}

void Communicator::begin(std::string phase) {
  ++generation_;
  phase_ = std::move(phase);
}

void Communicator::send(int dest, std::int32_t tag,
                        std::vector<std::uint8_t> payload) {
  Message m{generation_, rank_, tag, std::move(payload)};
  if (!transport_->send(dest, std::move(m), timeout_)) {
    throw CollectiveError("send timed out", generation_, phase_, dest);
  }
}

std::vector<std::uint8_t> Communicator::recv(int source, std::int32_t tag) {
  auto m = transport_->recv(source, timeout_);
  if (!m) {
    throw CollectiveError("timed out waiting for rank " +
                              std::to_string(source),
                          generation_, phase_, source);
  }
  if (m->generation != generation_ || m->tag != tag || m->source != source) {
    throw CollectiveError(
        "protocol mismatch: got generation " + std::to_string(m->generation) +
            " tag " + std::to_string(m->tag) + " from rank " +
            std::to_string(m->source) + ", expected tag " + std::to_string(tag),
        generation_, phase_, source);
  }
  return std::move(m->payload);
}

std::vector<Communicator> make_inproc_group(int world_size,
                                            std::chrono::milliseconds timeout) {
  auto hub = InProcHub::create(world_size);
  std::vector<Communicator> group;
  group.reserve(static_cast<std::size_t>(world_size));
  for (int r = 0; r < world_size; ++r) group.emplace_back(hub->endpoint(r), timeout);
  return group;
}

}  // namespace lioncub
