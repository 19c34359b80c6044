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

#include "fvlrp/fisher.h"
#include "fvlrp/gmm.h"
#include "fvlrp/rng.h"

namespace fvlrp {
namespace {

GmmModel RandomGmm(int K, int D, Rng& rng) {
  GmmModel m;
  m.num_components = K;
  m.dim = D;
  m.weights.assign(K, 1.0 / K);
  for (int i = 0; i < K * D; ++i) {
    m.means.push_back(rng.Normal());
    m.sigmas.push_back(0.5 + rng.Uniform());
  }
  return m;
}

DescriptorSet RandomSet(std::size_t n, int D, Rng& rng) {
  DescriptorSet ds;
  ds.image_width = 64;
  ds.image_height = 64;
  for (std::size_t l = 0; l < n; ++l) {
    LocalDescriptor d;
    for (int r = 0; r < D; ++r) d.values.push_back(rng.Normal());
    d.area = {0, 0, 16, 16};
    ds.descriptors.push_back(std::move(d));
  }
  return ds;
}

void BM_EStep(benchmark::State& state) {
  Rng rng(3);
  const int K = static_cast<int>(state.range(0));
  const GmmModel m = RandomGmm(K, 16, rng);
  const DescriptorSet ds = RandomSet(1024, 16, rng);
  std::vector<double> gamma(K);
  for (auto _ : state) {
    double s = 0.0;
    for (const auto& d : ds.descriptors) s += Responsibilities(m, d.values, gamma);
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations() * ds.size());
}
BENCHMARK(BM_EStep)->Arg(8)->Arg(64);

void BM_AggregateImprove(benchmark::State& state) {
  Rng rng(5);
  const GmmModel m = RandomGmm(static_cast<int>(state.range(0)), 16, rng);
  const DescriptorSet ds = RandomSet(169, 16, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Improve(Aggregate(m, ds)));
  }
}
BENCHMARK(BM_AggregateImprove)->Arg(8)->Arg(64);

}  // namespace
}  // namespace fvlrp
