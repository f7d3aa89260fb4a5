// SPDX-License-Identifier: Apache-2.0

#include "lioncub/packing.hpp"

#include <string>

#include "lioncub/errors.hpp"
#include "lioncub/wire.hpp"

namespace lioncub {

namespace {

constexpr std::uint8_t kSignMapFlag = 0x80;

void check_lane_width(int width) {
  if (width != 1 && width != 2 && width != 4 && width != 8 && width != 16 &&
      width != 32) {
    throw ConfigError("unsupported lane width " + std::to_string(width));
  }
}

}  // namespace

bool is_packable_width(int width) {
  return width == 1 || width == 2 || width == 4 || width == 8;
}

void pack_unsigned(std::span<const std::uint32_t> values, int width,
                   std::vector<std::uint8_t>& out) {
  check_lane_width(width);
  out.assign(PackedBits::payload_size(values.size(), width), 0);
  if (width >= 8) {
    const std::size_t bytes = static_cast<std::size_t>(width) / 8;
    for (std::size_t j = 0; j < values.size(); ++j) {
      std::uint32_t v = values[j];
      for (std::size_t b = 0; b < bytes; ++b) {
        out[j * bytes + b] = static_cast<std::uint8_t>(v & 0xFFu);
        v >>= 8;
      }
    }
    return;
  }
  const std::size_t per_byte = 8 / static_cast<std::size_t>(width);
  for (std::size_t j = 0; j < values.size(); ++j) {
    const auto shift = static_cast<unsigned>((j % per_byte) * width);
    out[j / per_byte] |= static_cast<std::uint8_t>(values[j] << shift);
  }
}

std::vector<std::uint32_t> unpack_unsigned(std::span<const std::uint8_t> bytes,
                                           std::size_t count, int width) {
  check_lane_width(width);
  if (bytes.size() != PackedBits::payload_size(count, width)) {
    throw FormatError("packed payload has " + std::to_string(bytes.size()) +
                      " bytes, expected " +
                      std::to_string(PackedBits::payload_size(count, width)));
  }
  std::vector<std::uint32_t> out(count);
  if (width >= 8) {
    const std::size_t n = static_cast<std::size_t>(width) / 8;
    for (std::size_t j = 0; j < count; ++j) {
      std::uint32_t v = 0;
      for (std::size_t b = 0; b < n; ++b) {
        v |= static_cast<std::uint32_t>(bytes[j * n + b]) << (8 * b);
      }
      out[j] = v;
    }
    return out;
  }
  const std::size_t per_byte = 8 / static_cast<std::size_t>(width);
  const std::uint32_t mask = (1u << width) - 1u;
  for (std::size_t j = 0; j < count; ++j) {
    const auto shift = static_cast<unsigned>((j % per_byte) * width);
    out[j] = (bytes[j / per_byte] >> shift) & mask;
  }
  return out;
}

PackedBits pack(std::span<const std::int32_t> values, int width,
                std::int32_t offset) {
  if (!is_packable_width(width)) {
    throw ConfigError("pack: width must be 1, 2, 4 or 8, got " +
                      std::to_string(width));
  }
  const std::int64_t hi = (std::int64_t{1} << width) - 1;
  std::vector<std::uint32_t> stored(values.size());
  for (std::size_t j = 0; j < values.size(); ++j) {
    const std::int64_t v = std::int64_t{values[j]} + offset;
    if (v < 0 || v > hi) {
      throw RangeError("pack: value " + std::to_string(values[j]) +
                           " at index " + std::to_string(j) +
                           " does not fit in " + std::to_string(width) +
                           " bits with offset " + std::to_string(offset),
                       j);
    }
    stored[j] = static_cast<std::uint32_t>(v);
  }
  PackedBits out;
  out.width = width;
  out.count = static_cast<std::uint32_t>(values.size());
  out.offset = offset;
  pack_unsigned(stored, width, out.payload);
  return out;
}

PackedBits pack_signs(std::span<const std::int32_t> signs) {
  std::vector<std::uint32_t> stored(signs.size());
  for (std::size_t j = 0; j < signs.size(); ++j) {
    if (signs[j] != 1 && signs[j] != -1) {
      throw RangeError("pack_signs: value " + std::to_string(signs[j]) +
                           " at index " + std::to_string(j) + " is not +-1",
                       j);
    }
    stored[j] = signs[j] > 0 ? 1u : 0u;
  }
  PackedBits out;
  out.width = 1;
  out.count = static_cast<std::uint32_t>(signs.size());
  out.sign_map = true;
  pack_unsigned(stored, 1, out.payload);
  return out;
}

std::vector<std::int32_t> unpack(const PackedBits& packed) {
  if (!is_packable_width(packed.width)) {
    throw ConfigError("unpack: unsupported width " +
                      std::to_string(packed.width));
  }
  if (packed.sign_map && packed.width != 1) {
    throw FormatError("unpack: sign map requires width 1");
  }
  const auto stored =
      unpack_unsigned(packed.payload, packed.count, packed.width);
  std::vector<std::int32_t> out(stored.size());
  for (std::size_t j = 0; j < stored.size(); ++j) {
    out[j] = packed.sign_map
                 ? (stored[j] ? 1 : -1)
                 : static_cast<std::int32_t>(std::int64_t{stored[j]} -
                                             packed.offset);
  }
  return out;
}

std::vector<std::uint8_t> serialize(const PackedBits& packed) {
  wire::Bytes out;
  out.reserve(9 + packed.payload.size());
  wire::put_le<std::uint32_t>(out, packed.count);
  std::uint8_t width_byte = static_cast<std::uint8_t>(packed.width);
  if (packed.sign_map) width_byte |= kSignMapFlag;
  out.push_back(width_byte);
  wire::put_le<std::int32_t>(out, packed.sign_map ? 0 : packed.offset);
  out.insert(out.end(), packed.payload.begin(), packed.payload.end());
  return out;
}

PackedBits deserialize_packed(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 9) throw FormatError("packed header truncated");
  PackedBits p;
  p.count = wire::get_le<std::uint32_t>(bytes, 0);
  p.sign_map = (bytes[4] & kSignMapFlag) != 0;
  p.width = bytes[4] & ~kSignMapFlag;
  p.offset = wire::get_le<std::int32_t>(bytes, 5);
  if (!is_packable_width(p.width)) {
    throw FormatError("packed header has invalid width " +
                      std::to_string(p.width));
  }
  const std::size_t expected = PackedBits::payload_size(p.count, p.width);
  if (bytes.size() - 9 != expected) {
    throw FormatError("packed payload has " + std::to_string(bytes.size() - 9) +
                      " bytes, expected " + std::to_string(expected));
  }
  p.payload.assign(bytes.begin() + 9, bytes.end());
  return p;
}

}  // namespace lioncub
