// SPDX-License-Identifier: Apache-2.0

// Bit packing of small integers into bytes. Element j lives in byte
// floor(j * width / 8) at bit offset (j mod (8 / width)) * width, i.e. the
// first element occupies the least significant bits.
//
// Serialized form (little-endian):
//   u32 count | u8 width | i32 offset | payload
// Bit 7 of the width byte marks the {-1, +1} -> {0, 1} sign map, in which
// case the offset field is unused and written as 0.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lioncub {

struct PackedBits {
  int width = 8;
  std::uint32_t count = 0;
  // Added to every value before packing; subtracted on unpack.
  std::int32_t offset = 0;
  // Store -1 as 0 and +1 as 1 instead of applying `offset`.
  bool sign_map = false;
  std::vector<std::uint8_t> payload;

  static std::size_t payload_size(std::size_t count, int width) {
    return (count * static_cast<std::size_t>(width) + 7) / 8;
  }
};

bool is_packable_width(int width);

// Throws ConfigError for an unsupported width and RangeError (with the
// element index) for a value that does not fit after the offset.
PackedBits pack(std::span<const std::int32_t> values, int width,
                std::int32_t offset);
PackedBits pack_signs(std::span<const std::int32_t> signs);

// Throws FormatError when the payload length disagrees with count and width.
std::vector<std::int32_t> unpack(const PackedBits& packed);

std::vector<std::uint8_t> serialize(const PackedBits& packed);
PackedBits deserialize_packed(std::span<const std::uint8_t> bytes);

// Raw unsigned lane access used by the allreduce paths.
void pack_unsigned(std::span<const std::uint32_t> values, int width,
                   std::vector<std::uint8_t>& out);
std::vector<std::uint32_t> unpack_unsigned(std::span<const std::uint8_t> bytes,
                                           std::size_t count, int width);

}  // namespace lioncub
