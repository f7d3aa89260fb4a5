// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <vector>

#include "doctest.h"
#include "lioncub/errors.hpp"
#include "lioncub/packing.hpp"
#include "lioncub/rng.hpp"

using namespace lioncub;

TEST_CASE("pack examples") {
  const std::vector<std::int32_t> a = {3, 12};
  CHECK(pack(a, 4, 0).payload == std::vector<std::uint8_t>{0xC3});
  const std::vector<std::int32_t> b = {1, 0, 1, 1, 0, 0, 0, 0};
  CHECK(pack(b, 1, 0).payload == std::vector<std::uint8_t>{0x0D});
  const std::vector<std::int32_t> s = {-1, 1};
  const auto ps = pack_signs(s);
  CHECK(ps.payload == std::vector<std::uint8_t>{0x02});
  CHECK(ps.sign_map);
}

TEST_CASE("unpack examples") {
  std::vector<std::int32_t> v(16);
  for (int i = 0; i < 16; ++i) v[i] = i;
  CHECK(unpack(pack(v, 4, 0)) == v);

  PackedBits signs;
  signs.width = 1;
  signs.count = 2;
  signs.sign_map = true;
  signs.payload = {0x02};
  CHECK(unpack(signs) == std::vector<std::int32_t>{-1, 1});

  PackedBits bad = pack(v, 4, 0);
  bad.payload.pop_back();
  CHECK_THROWS_AS(unpack(bad), FormatError);
  bad.payload.push_back(0);
  bad.payload.push_back(0);
  CHECK_THROWS_AS(unpack(bad), FormatError);
}

TEST_CASE("pack errors") {
  const std::vector<std::int32_t> v = {0, 1, 2, 3, 4};
  try {
    pack(v, 2, 0);
    FAIL("expected RangeError");
  } catch (const RangeError& e) {
    CHECK(e.index() == 4);
  }
  try {
    pack(v, 4, -1);
    FAIL("expected RangeError");
  } catch (const RangeError& e) {
    CHECK(e.index() == 0);
  }
  CHECK_THROWS_AS(pack(v, 3, 0), ConfigError);
  CHECK_THROWS_AS(pack(v, 0, 0), ConfigError);
  const std::vector<std::int32_t> zero = {0};
  CHECK_THROWS_AS(pack_signs(zero), RangeError);
}

TEST_CASE("payload length and layout") {
  for (int width : {1, 2, 4, 8}) {
    for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 33u}) {
      const std::vector<std::int32_t> v(n, 0);
      CHECK(pack(v, width, 0).payload.size() == (n * width + 7) / 8);
    }
  }
  // Element j sits at bit (j mod (8/w)) * w of byte j*w/8.
  const std::vector<std::int32_t> v = {1, 2, 3, 0, 3};
  const auto p = pack(v, 2, 0);
  REQUIRE(p.payload.size() == 2);
  CHECK(p.payload[0] == (1 | 2 << 2 | 3 << 4 | 0 << 6));
  CHECK(p.payload[1] == 3);
}

namespace {

// Enumerates every vector of length `len` over [0, 2^width) with an offset.
void exhaustive(int width, std::size_t len, std::int32_t offset) {
  const std::uint32_t levels = 1u << width;
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < len; ++i) total *= levels;
  std::vector<std::int32_t> v(len);
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t c = code;
    for (std::size_t i = 0; i < len; ++i) {
      v[i] = static_cast<std::int32_t>(c % levels) - offset;
      c /= levels;
    }
    const auto packed = pack(v, width, offset);
    REQUIRE(unpack(packed) == v);
    REQUIRE(unpack(deserialize_packed(serialize(packed))) == v);
  }
}

}  // namespace

TEST_CASE("roundtrip is exhaustive at widths up to 4") {
  exhaustive(1, 12, 0);
  exhaustive(1, 9, 1);
  exhaustive(2, 7, 0);
  exhaustive(2, 5, 2);
  exhaustive(4, 4, 0);
  exhaustive(4, 3, 7);
}

TEST_CASE("sign roundtrip is exhaustive") {
  for (std::size_t len = 0; len <= 12; ++len) {
    for (std::uint32_t code = 0; code < (1u << len); ++code) {
      std::vector<std::int32_t> v(len);
      for (std::size_t i = 0; i < len; ++i) v[i] = (code >> i & 1) ? 1 : -1;
      REQUIRE(unpack(pack_signs(v)) == v);
    }
  }
}

TEST_CASE("roundtrip is randomized at width 8") {
  Rng rng(77);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t len = rng.next_u64() % 300;
    const std::int32_t offset = trial % 2 ? 127 : 0;
    std::vector<std::int32_t> v(len);
    for (auto& x : v) x = static_cast<std::int32_t>(rng.next_u64() % 256) - offset;
    REQUIRE(unpack(pack(v, 8, offset)) == v);
  }
}

TEST_CASE("serialize golden bytes") {
  const std::vector<std::int32_t> v = {-7, 0, 7};
  const auto bytes = serialize(pack(v, 4, 7));
  const std::vector<std::uint8_t> expected = {
      3, 0, 0, 0,  // count
      4,           // width
      7, 0, 0, 0,  // offset
      0x70, 0x0E};
  CHECK(bytes == expected);

  const std::vector<std::int32_t> s = {-1, 1, 1};
  const std::vector<std::uint8_t> expected_signs = {3, 0, 0, 0, 0x81, 0, 0, 0, 0, 0x06};
  CHECK(serialize(pack_signs(s)) == expected_signs);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(deserialize_packed(truncated), FormatError);
  CHECK_THROWS_AS(deserialize_packed(std::vector<std::uint8_t>{1, 0}), FormatError);
}

TEST_CASE("unsigned lanes roundtrip") {
  Rng rng(5);
  for (int width : {1, 2, 4, 8, 16, 32}) {
    std::vector<std::uint32_t> v(97);
    const std::uint64_t mod = width == 32 ? (1ull << 32) : (1ull << width);
    for (auto& x : v) x = static_cast<std::uint32_t>(rng.next_u64() % mod);
    std::vector<std::uint8_t> bytes;
    pack_unsigned(v, width, bytes);
    CHECK(bytes.size() == (v.size() * width + 7) / 8);
    CHECK(unpack_unsigned(bytes, v.size(), width) == v);
  }
}
