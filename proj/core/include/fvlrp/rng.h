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

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace fvlrp {

// Seeded random source. All stochastic operations in the library take one of
// these explicitly. The engine is std::mt19937_64, whose output sequence is
// fixed by the standard; the uniform and normal transforms are implemented
// here so results do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double Uniform();

  // Uniform integer in [0, n). n must be positive.
  std::size_t Index(std::size_t n);

  // Standard normal via Box-Muller (no cached second value).
  double Normal();

  // Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> Permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream);

}  // namespace fvlrp
