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


#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string_view>

namespace fvlrp::binary {

// Little-endian primitives for the cache formats (HMAP1, DESC1, FVEC1).
// Byte order is explicit so files are identical across hosts.
void WriteMagic(std::ostream& out, std::string_view magic);
void WriteU32(std::ostream& out, std::uint32_t v);
void WriteF64(std::ostream& out, double v);

// Each reader throws ParseError on a short read or wrong magic.
void ExpectMagic(std::istream& in, std::string_view magic);
std::uint32_t ReadU32(std::istream& in);
double ReadF64(std::istream& in);

}  // namespace fvlrp::binary
