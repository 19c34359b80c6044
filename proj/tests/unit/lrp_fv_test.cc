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


#include "fvlrp/lrp_fv.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fvlrp/errors.h"
#include "fvlrp/fisher.h"
#include "fvlrp/rng.h"
#include "test_util.h"

namespace fvlrp {
namespace {

double Sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// K = 1, D = 1 standard normal: Psi(l) = [0, l, (l^2 - 1) / sqrt 2].
GmmModel UnitGmm() {
  GmmModel m;
  m.num_components = 1;
  m.dim = 1;
  m.weights = {1.0};
  m.means = {0.0};
  m.sigmas = {1.0};
  return m;
}

DescriptorSet Points(std::vector<double> xs, int w = 8, int h = 8) {
  DescriptorSet ds;
  ds.image_width = w;
  ds.image_height = h;
  for (double x : xs) ds.descriptors.push_back({{x}, {0, 0, 2, 2}});
  return ds;
}

R3Map MakeR3(std::vector<double> v) {
  R3Map r;
  r.values = std::move(v);
  r.score = Sum(r.values);
  return r;
}

TEST(R3Test, HandExample) {
  SvmModel m;
  m.classes.push_back({"a", {2, -1}, 0.5, {}});
  const R3Map r = RelevanceR3(m, std::vector<double>{0.6, 0.8}, 0);
  EXPECT_NEAR(r.values[0], 1.45, 1e-15);
  EXPECT_NEAR(r.values[1], -0.55, 1e-15);
  EXPECT_NEAR(r.score, 0.9, 1e-15);
  EXPECT_NEAR(Sum(r.values), 0.9, 1e-15);
  EXPECT_THROW(RelevanceR3(m, std::vector<double>{1.0}, 0), DimError);
}

TEST(R3Test, SingleActiveDimension) {
  SvmModel m;
  m.classes.push_back({"a", {0, 0, 1, 0}, 0.0, {}});
  const R3Map r = RelevanceR3(m, std::vector<double>{0.4, -0.2, 0.7, 0.1}, 0);
  EXPECT_EQ(r.values, std::vector<double>({0, 0, 0.7, 0}));
}

TEST(R3Test, DualMatchesPrimal) {
  Rng rng(1);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 30; ++i) {
    y.push_back(i % 2 ? 1 : -1);
    x.push_back({rng.Normal() + y.back(), rng.Normal(), rng.Normal()});
  }
  SvmTrainOptions o;
  o.keep_dual = true;
  const SvmModel m = SvmTrain(x, {"a"}, {y}, o);
  const R3Map p = RelevanceR3(m, x[0], 0), d = RelevanceR3Dual(m, x[0], 0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.values[i], d.values[i], 1e-8);
}

TEST(R2Test, CancellationInstance) {
  // Mean dim: m = (2, -2). Weight dim is in Z(x); sigma dim carries no R3.
  const GmmModel g = UnitGmm();
  const DescriptorSet ds = Points({2.0, -2.0});
  const MappingMatrixView view(g, ds);
  const R3Map r3 = MakeR3({0.0, 1.0, 0.0});

  const R2Map abs = RelevanceR2(r3, view, {R2Variant::kAbsolute, 0.0});
  EXPECT_DOUBLE_EQ(abs.values[0], 0.5);
  EXPECT_DOUBLE_EQ(abs.values[1], 0.5);
  EXPECT_EQ(abs.zero_dims, std::vector<int>({0}));

  const R2Map eps = RelevanceR2(r3, view, {R2Variant::kEpsilon, 1.0});
  EXPECT_DOUBLE_EQ(eps.values[0], 2.0);
  EXPECT_DOUBLE_EQ(eps.values[1], -2.0);
  EXPECT_EQ(Sum(eps.values), 0.0);

  EXPECT_THROW(RelevanceR2(r3, view, {R2Variant::kPlain, 0.0}), ZeroDenominatorError);
}

TEST(R2Test, ZeroDimensionsSpreadUniformly) {
  const GmmModel g = UnitGmm();
  const DescriptorSet ds = Points({0.5, 1.5});
  const R2Map r = RelevanceR2(MakeR3({0.4, 0.0, 0.0}), MappingMatrixView(g, ds),
                              {R2Variant::kPlain, 0.0});
  EXPECT_DOUBLE_EQ(r.xi, 0.2);
  EXPECT_DOUBLE_EQ(r.values[0], 0.2);
  EXPECT_DOUBLE_EQ(r.values[1], 0.2);
}

TEST(R2Test, SingleDescriptorReceivesEverything) {
  Rng rng(2);
  const GmmModel g = testing::RandomGmm(3, 2, rng);
  const DescriptorSet ds = testing::RandomDescriptors(1, 2, 16, 16, 4, rng);
  std::vector<double> v(FvLength(g));
  for (double& x : v) x = rng.Normal();
  const R3Map r3 = MakeR3(v);
  for (auto variant : {R2Variant::kPlain, R2Variant::kAbsolute}) {
    const R2Map r = RelevanceR2(r3, MappingMatrixView(g, ds), {variant, 0.0});
    EXPECT_NEAR(r.values[0], r3.score, 1e-12 * std::max(1.0, std::abs(r3.score)));
  }
}

TEST(R2Test, EpsilonApproachesPlain) {
  Rng rng(3);
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    const GmmModel g = testing::RandomGmm(2, 2, rng);
    const DescriptorSet ds = testing::RandomDescriptors(6, 2, 16, 16, 4, rng);
    std::vector<double> v(FvLength(g));
    for (double& x : v) x = rng.Normal();
    const MappingMatrixView view(g, ds);
    // Only instances whose non-zero columns are bounded away from zero.
    double min_col = INFINITY;
    std::vector<double> col(FvLength(g), 0.0);
    for (const auto& d : ds.descriptors) {
      const auto e = EmbedDescriptor(g, d.values);
      for (std::size_t i = 0; i < e.size(); ++i) col[i] += e[i];
    }
    for (double c : col) if (c != 0.0) min_col = std::min(min_col, std::abs(c));
    if (min_col < 1e-3) continue;
    ++checked;
    const R2Map plain = RelevanceR2(MakeR3(v), view, {R2Variant::kPlain, 0.0});
    const R2Map eps = RelevanceR2(MakeR3(v), view, {R2Variant::kEpsilon, 1e-8});
    double mx = 0.0;
    for (double x : plain.values) mx = std::max(mx, std::abs(x));
    for (std::size_t l = 0; l < plain.values.size(); ++l) {
      EXPECT_LE(std::abs(eps.values[l] - plain.values[l]), 1e-6 * mx);
    }
  }
  EXPECT_GT(checked, 5);
}

TEST(R2Test, AbsoluteConservesOnRandomInstances) {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const GmmModel g = testing::RandomGmm(3, 3, rng);
    const DescriptorSet ds = testing::RandomDescriptors(10, 3, 20, 20, 5, rng);
    std::vector<double> v(FvLength(g));
    for (double& x : v) x = rng.Normal();
    const R3Map r3 = MakeR3(v);
    const R2Map r = RelevanceR2(r3, MappingMatrixView(g, ds), {R2Variant::kAbsolute, 0.0});
    EXPECT_LE(testing::RelErr(Sum(r.values), r3.score), 1e-9);
    const Heatmap h = RelevanceR1(r, ds, 20, 20);
    EXPECT_LE(testing::RelErr(h.Sum(), r3.score), 1e-9);
  }
}

TEST(R1Test, UniformSplitAndSuperposition) {
  DescriptorSet ds;
  ds.image_width = ds.image_height = 4;
  ds.descriptors.push_back({{0.0}, {0, 0, 2, 2}});
  R2Map r2;
  r2.values = {1.0};
  Heatmap h = RelevanceR1(r2, ds, 4, 4);
  EXPECT_EQ(h.at(0, 0), 0.25);
  EXPECT_EQ(h.at(1, 1), 0.25);
  EXPECT_EQ(h.at(2, 2), 0.0);

  ds.descriptors.push_back({{0.0}, {1, 1, 2, 2}});
  r2.values = {1.0, 2.0};
  h = RelevanceR1(r2, ds, 4, 4);
  EXPECT_EQ(h.at(1, 1), 0.25 + 0.5);
  EXPECT_EQ(h.at(2, 2), 0.5);
  EXPECT_EQ(h.Sum(), 3.0);
}

TEST(R1Test, BorderClippingKeepsMass) {
  DescriptorSet ds;
  ds.descriptors.push_back({{0.0}, {-1, -1, 3, 3}});
  R2Map r2;
  r2.values = {1.0};
  const Heatmap h = RelevanceR1(r2, ds, 4, 4);
  EXPECT_EQ(h.at(0, 0), 0.25);
  EXPECT_EQ(h.Sum(), 1.0);
  ds.descriptors[0].area = {10, 10, 2, 2};
  EXPECT_THROW(RelevanceR1(r2, ds, 4, 4), ValidationError);
}

TEST(R1Test, LinearInR2) {
  Rng rng(5);
  const DescriptorSet ds = testing::RandomDescriptors(8, 1, 12, 12, 4, rng);
  R2Map a;
  for (int i = 0; i < 8; ++i) a.values.push_back(rng.Normal());
  R2Map b = a;
  for (double& v : b.values) v *= 2.5;
  const Heatmap ha = RelevanceR1(a, ds, 12, 12), hb = RelevanceR1(b, ds, 12, 12);
  for (std::size_t p = 0; p < ha.values.size(); ++p) {
    EXPECT_NEAR(hb.values[p], 2.5 * ha.values[p], 1e-14);
  }
}

FvModels ToyModels(Rng& rng) {
  FvModels m;
  m.patch = 8;
  m.stride = 4;
  m.pca.input_dim = kRawDescriptorDim;
  m.pca.output_dim = 2;
  m.pca.mean.assign(kRawDescriptorDim, 0.05);
  for (int i = 0; i < 2 * kRawDescriptorDim; ++i) m.pca.basis.push_back(rng.Normal() * 0.1);
  m.pca.eigenvalues = {1.0, 1.0};
  m.gmm = testing::RandomGmm(2, 2, rng);
  m.svm = testing::RandomSvm(FvLength(m.gmm), 1, rng);
  return m;
}

TEST(ExplainTest, AbsoluteHeatmapSumsToScoreAndIsDeterministic) {
  Rng rng(6);
  const FvModels models = ToyModels(rng);
  Image img(24, 24, 1);
  for (double& p : img.pixels) p = rng.Uniform();
  const Explanation a = Explain(img, models, 0, {R2Variant::kAbsolute, 0.0});
  EXPECT_LE(testing::RelErr(a.heatmap.Sum(), a.score), 1e-9);
  EXPECT_LE(testing::RelErr(Sum(a.r3.values), a.score), 1e-9);
  const Explanation b = Explain(img, models, 0, {R2Variant::kAbsolute, 0.0});
  EXPECT_EQ(a.heatmap, b.heatmap);
  EXPECT_NEAR(a.score, Score(models.svm, a.improved_fv, 0), 0.0);
}

TEST(ExplainTest, ConstantImageRoutesThroughZeroDims) {
  Rng rng(7);
  FvModels models = ToyModels(rng);
  // A zero PCA mean makes every projected descriptor of a flat image zero.
  models.pca.mean.assign(kRawDescriptorDim, 0.0);
  const Image img(16, 16, 1, 0.5);
  const Explanation e = Explain(img, models, 0, {R2Variant::kEpsilon, 100.0});
  const auto psi = EmbedDescriptor(models.gmm, std::vector<double>(2, 0.0));
  std::vector<int> zero;
  for (int d = 0; d < static_cast<int>(psi.size()); ++d) {
    if (psi[d] == 0.0) zero.push_back(d);
  }
  EXPECT_EQ(e.r2.zero_dims, zero);
  for (const auto& d : e.descriptors.descriptors) {
    for (double v : d.values) EXPECT_EQ(v, 0.0);
  }
  // All descriptors are identical, so they share relevance equally.
  for (double v : e.r2.values) EXPECT_EQ(v, e.r2.values[0]);
}

TEST(VariantTest, Names) {
  for (auto v : {R2Variant::kPlain, R2Variant::kEpsilon, R2Variant::kAbsolute}) {
    EXPECT_EQ(ParseVariant(VariantName(v)), v);
  }
  EXPECT_THROW(ParseVariant("fancy"), UsageError);
}

}  // namespace
}  // namespace fvlrp
