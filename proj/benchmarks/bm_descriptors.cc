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


#include <benchmark/benchmark.h>

#include "fvlrp/descriptors.h"
#include "fvlrp/synthgen.h"

namespace fvlrp {
namespace {

void BM_ExtractDense(benchmark::State& state) {
  const CorpusSpec spec = DefaultCorpusSpec(2, 1.0, 7);
  const LabeledImage img = GenerateImage(spec, 11, 0);
  const int stride = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ExtractDense(img.image, 16, stride));
  }
}
BENCHMARK(BM_ExtractDense)->Arg(8)->Arg(4)->Arg(2);

}  // namespace
}  // namespace fvlrp
