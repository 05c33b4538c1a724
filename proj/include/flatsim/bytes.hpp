// Copyright 2026 The Flatsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flatsim/errors.hpp"

namespace flatsim {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

inline void append_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }

inline void append_u16_be(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void append_u32_be(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void append_u32_le(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void append_u64_le(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// IEEE-754 binary64, little-endian byte order.
inline void append_f64_le(Bytes& out, double v) {
  append_u64_le(out, std::bit_cast<std::uint64_t>(v));
}

inline void append_bytes(Bytes& out, ByteSpan data) {
  out.insert(out.end(), data.begin(), data.end());
}

inline Bytes str_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

// Bounds-checked forward cursor over a byte span. Throws ParseError on any
// out-of-range read so truncated or padded messages are always rejected.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan data, std::string what = "bytes")
      : data_(data), what_(std::move(what)) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

  void expect_done() const {
    if (!done()) throw ParseError(what_ + ": trailing bytes after message");
  }

  std::uint8_t u8() { return take(1)[0]; }

  std::uint16_t u16_be() {
    ByteSpan b = take(2);
    return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }

  std::uint32_t u32_be() {
    ByteSpan b = take(4);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
  }

  std::uint32_t u32_le() {
    ByteSpan b = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  std::uint64_t u64_le() {
    ByteSpan b = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  double f64_le() { return std::bit_cast<double>(u64_le()); }

  ByteSpan take(std::size_t n) {
    if (remaining() < n) throw ParseError(what_ + ": truncated message");
    ByteSpan out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> take_array() {
    ByteSpan b = take(N);
    std::array<std::uint8_t, N> out;
    std::memcpy(out.data(), b.data(), N);
    return out;
  }

  void expect_magic(ByteSpan magic, const char* name) {
    ByteSpan b = take(magic.size());
    if (!std::equal(b.begin(), b.end(), magic.begin()))
      throw ParseError(what_ + ": bad " + name + " magic");
  }

 private:
  ByteSpan data_;
  std::size_t pos_ = 0;
  std::string what_;
};

inline std::string to_hex(ByteSpan data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

}  // namespace flatsim
