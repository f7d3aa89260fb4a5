// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lioncub {

// Invalid configuration or parameters (maps to CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input outside a function's mathematical domain (e.g. empty vector).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A value cannot be represented, e.g. packing an out-of-range integer.
class RangeError : public std::out_of_range {
 public:
  RangeError(const std::string& what, std::size_t index)
      : std::out_of_range(what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// Malformed serialized data.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A collective could not complete (timeout, protocol mismatch, closed peer).
class CollectiveError : public std::runtime_error {
 public:
  CollectiveError(const std::string& what, std::uint64_t generation,
                  std::string phase, int peer)
      : std::runtime_error(what + " [generation=" + std::to_string(generation) +
                           " phase=" + phase +
                           " peer=" + std::to_string(peer) + "]"),
        generation_(generation),
        phase_(std::move(phase)),
        peer_(peer) {}

  std::uint64_t generation() const noexcept { return generation_; }
  const std::string& phase() const noexcept { return phase_; }
  // Rank that failed to deliver (or accept) a message.
  int peer() const noexcept { return peer_; }

 private:
  std::uint64_t generation_;
  std::string phase_;
  int peer_;
};

}  // namespace lioncub
