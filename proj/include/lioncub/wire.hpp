// SPDX-License-Identifier: Apache-2.0

// Little-endian encode/decode helpers for wire formats.

#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <type_traits>
#include <vector>

#include "lioncub/errors.hpp"

namespace lioncub::wire {

using Bytes = std::vector<std::uint8_t>;

template <typename T>
void put_le(Bytes& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(bits & 0xFFu));
    bits = static_cast<U>(bits >> 8);
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t pos) {
  if (pos + sizeof(T) > in.size()) {
    throw FormatError("truncated buffer");
  }
  using U = std::make_unsigned_t<T>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits = static_cast<U>(bits | (static_cast<U>(in[pos + i]) << (8 * i)));
  }
  return static_cast<T>(bits);
}

inline void put_f64(Bytes& out, double value) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, sizeof bits);
  put_le(out, bits);
}

inline double get_f64(std::span<const std::uint8_t> in, std::size_t pos) {
  const auto bits = get_le<std::uint64_t>(in, pos);
  double value;
  std::memcpy(&value, &bits, sizeof value);
  return value;
}

inline void put_f32(Bytes& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, sizeof bits);
  put_le(out, bits);
}

inline float get_f32(std::span<const std::uint8_t> in, std::size_t pos) {
  const auto bits = get_le<std::uint32_t>(in, pos);
  float value;
  std::memcpy(&value, &bits, sizeof value);
  return value;
}

inline Bytes encode_i32(std::span<const std::int32_t> values) {
  Bytes out;
  out.reserve(values.size() * 4);
  for (auto v : values) put_le(out, v);
  return out;
}

inline std::vector<std::int32_t> decode_i32(std::span<const std::uint8_t> in) {
  if (in.size() % 4 != 0) throw FormatError("int32 payload not a multiple of 4");
  std::vector<std::int32_t> out(in.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = get_le<std::int32_t>(in, 4 * i);
  }
  return out;
}

inline Bytes encode_f64(std::span<const double> values) {
  Bytes out;
  out.reserve(values.size() * 8);
  for (auto v : values) put_f64(out, v);
  return out;
}

inline std::vector<double> decode_f64(std::span<const std::uint8_t> in) {
  if (in.size() % 8 != 0) throw FormatError("float64 payload not a multiple of 8");
  std::vector<double> out(in.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_f64(in, 8 * i);
  return out;
}

}  // namespace lioncub::wire
