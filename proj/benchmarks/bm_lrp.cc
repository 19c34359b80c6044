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
#include "fvlrp/lrp_fv.h"
#include "fvlrp/lrp_nn.h"
#include "fvlrp/rng.h"

namespace fvlrp {
namespace {

void BM_RelevanceR2(benchmark::State& state) {
  Rng rng(9);
  const int K = static_cast<int>(state.range(0));
  const int D = 16;
  GmmModel gmm;
  gmm.num_components = K;
  gmm.dim = D;
  gmm.weights.assign(K, 1.0 / K);
  for (int i = 0; i < K * D; ++i) {
    gmm.means.push_back(rng.Normal());
    gmm.sigmas.push_back(0.5 + rng.Uniform());
  }
  DescriptorSet ds;
  ds.image_width = 64;
  ds.image_height = 64;
  for (int l = 0; l < 169; ++l) {
    LocalDescriptor d;
    for (int r = 0; r < D; ++r) d.values.push_back(rng.Normal());
    d.area = {(l % 13) * 4, (l / 13) * 4, 16, 16};
    ds.descriptors.push_back(std::move(d));
  }
  SvmModel svm;
  SvmClassifier c;
  c.name = "a";
  for (int i = 0; i < FvLength(gmm); ++i) c.w.push_back(rng.Normal());
  svm.classes.push_back(c);
  const R3Map r3 = RelevanceR3(svm, Improve(Aggregate(gmm, ds)), 0);
  const MappingMatrixView view(gmm, ds);
  for (auto _ : state) {
    benchmark::DoNotOptimize(RelevanceR2(r3, view, {R2Variant::kEpsilon, 100.0}));
  }
}
BENCHMARK(BM_RelevanceR2)->Arg(8)->Arg(64);

void BM_LrpEpsilonNet(benchmark::State& state) {
  const NeuralNet net = MakeNet(32, 32, 2, {64, 32}, {"a", "b"}, 4);
  Rng rng(2);
  std::vector<double> x(net.input_size());
  for (double& v : x) v = rng.Uniform() - 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(LrpEpsilon(net, x, 0, 0.01));
  }
}
BENCHMARK(BM_LrpEpsilonNet);

}  // namespace
}  // namespace fvlrp
