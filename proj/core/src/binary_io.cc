// Copyright 2026 The fvlrp Authors.
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


#include "fvlrp/binary_io.h"

#include <array>
#include <bit>
#include <string>

#include "fvlrp/errors.h"

namespace fvlrp::binary {
namespace {

template <std::size_t N>
std::array<unsigned char, N> ReadBytes(std::istream& in) {
  std::array<unsigned char, N> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), N);
  if (in.gcount() != static_cast<std::streamsize>(N)) {
    throw ParseError("unexpected end of binary stream");
  }
  return buf;
}

}  // namespace

void WriteMagic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

void WriteU32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 4);
}

void WriteF64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) {
    buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  }
  out.write(reinterpret_cast<const char*>(buf), 8);
}

void ExpectMagic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(magic.size()));
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) ||
      got != magic) {
    throw ParseError("bad magic, expected '" + std::string(magic) + "'");
  }
}

std::uint32_t ReadU32(std::istream& in) {
  const auto buf = ReadBytes<4>(in);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

double ReadF64(std::istream& in) {
  const auto buf = ReadBytes<8>(in);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace fvlrp::binary
