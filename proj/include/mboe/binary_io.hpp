// Copyright 2026 The mboe Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Little-endian primitives shared by the dictionary and model containers.
// Strings are a u32 byte length followed by raw UTF-8. Doubles are the
// IEEE-754 bit pattern written as a u64.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mboe/errors.hpp"

namespace mboe::binary {

template <typename UInt>
void write_uint(std::ostream& out, UInt value) {
  unsigned char buf[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    buf[i] = static_cast<unsigned char>(value >> (8 * i));
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(UInt));
}

template <typename UInt>
UInt read_uint(std::istream& in) {
  unsigned char buf[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(UInt))) {
    throw CorruptFileError("unexpected end of file");
  }
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(buf[i]) << (8 * i);
  }
  return value;
}

inline void write_f64(std::ostream& out, double value) {
  write_uint<std::uint64_t>(out, std::bit_cast<std::uint64_t>(value));
}

inline double read_f64(std::istream& in) {
  return std::bit_cast<double>(read_uint<std::uint64_t>(in));
}

inline void write_string(std::ostream& out, std::string_view s) {
  write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  const auto n = read_uint<std::uint32_t>(in);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) {
    throw CorruptFileError("unexpected end of file inside string");
  }
  return s;
}

inline void write_magic(std::ostream& out, std::string_view magic,
                        std::uint32_t version) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  write_uint<std::uint32_t>(out, version);
}

inline void read_magic(std::istream& in, std::string_view magic,
                       std::uint32_t version) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(magic.size())) ||
      got != magic) {
    throw CorruptFileError("bad magic, expected " + std::string(magic));
  }
  const auto v = read_uint<std::uint32_t>(in);
  if (v != version) {
    throw CorruptFileError("unsupported version " + std::to_string(v) +
                           " (expected " + std::to_string(version) + ")");
  }
}

// Guards against allocating absurd sizes read from a corrupt header.
inline std::uint64_t read_count(std::istream& in, std::uint64_t limit = 1ULL << 40) {
  const auto n = read_uint<std::uint64_t>(in);
  if (n > limit) throw CorruptFileError("implausible element count");
  return n;
}

}  // namespace mboe::binary
