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


#include "fvlrp/descriptors.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fvlrp/errors.h"
#include "fvlrp/imaging_io.h"
#include "fvlrp/rng.h"
#include "test_util.h"

namespace fvlrp {
namespace {

TEST(ExtractTest, GridCount) {
  const DescriptorSet ds = ExtractDense(Image(32, 32, 1, 0.3), 16, 8);
  ASSERT_EQ(ds.size(), 9u);
  EXPECT_EQ(ds.dim(), kRawDescriptorDim);
  EXPECT_EQ(ds.descriptors[0].area, (Area{0, 0, 16, 16}));
  EXPECT_EQ(ds.descriptors[1].area, (Area{8, 0, 16, 16}));
  EXPECT_EQ(ds.descriptors[8].area, (Area{16, 16, 16, 16}));
  // Non-divisible extent: floor((37 - 16) / 8) + 1 = 3 per axis.
  EXPECT_EQ(ExtractDense(Image(37, 20, 1), 16, 8).size(), 3u * 1u);
}

TEST(ExtractTest, ConstantImageGivesZeroDescriptors) {
  const DescriptorSet ds = ExtractDense(Image(24, 24, 1, 0.7), 16, 4);
  for (const auto& d : ds.descriptors) {
    for (double v : d.values) ASSERT_EQ(v, 0.0);
  }
}

TEST(ExtractTest, VerticalEdgeVotesHorizontalGradientBins) {
  Image img(16, 16, 1, 0.0);
  for (int y = 0; y < 16; ++y) {
    for (int x = 8; x < 16; ++x) img.at(x, y) = 1.0;
  }
  const DescriptorSet ds = ExtractDense(img, 16, 16);
  ASSERT_EQ(ds.size(), 1u);
  // Gradient points along +x: orientation 0, which is bin 0 of each cell.
  double in_bin0 = 0.0, total = 0.0;
  for (int i = 0; i < kRawDescriptorDim; ++i) {
    total += ds.descriptors[0].values[i];
    if (i % kOrientationBins == 0) in_bin0 += ds.descriptors[0].values[i];
  }
  ASSERT_GT(total, 0.0);
  EXPECT_NEAR(in_bin0 / total, 1.0, 1e-12);
}

TEST(ExtractTest, NormalizedAndClamped) {
  Rng rng(2);
  Image img(32, 32, 1);
  for (double& p : img.pixels) p = rng.Uniform();
  for (const auto& d : ExtractDense(img, 16, 8).descriptors) {
    double n2 = 0.0;
    for (double v : d.values) {
      EXPECT_GE(v, 0.0);
      n2 += v * v;
    }
    EXPECT_NEAR(n2, 1.0, 1e-12);
  }
}

TEST(ExtractTest, PatchTooLarge) {
  EXPECT_THROW(ExtractDense(Image(10, 40, 1), 16, 4), ExtractError);
  EXPECT_THROW(ExtractDense(Image(32, 32, 1), 16, 0), ExtractError);
}

TEST(ClipAreaTest, ClipsToImage) {
  EXPECT_EQ(ClipArea({-2, 3, 5, 5}, 10, 6), (Area{0, 3, 3, 3}));
  const Area empty = ClipArea({20, 0, 4, 4}, 10, 10);
  EXPECT_EQ(empty.w * empty.h, 0);
}

std::vector<std::vector<double>> AnisotropicSamples(Rng& rng, int n) {
  std::vector<std::vector<double>> out;
  const double scale[3] = {0.5, 3.0, 1.5};
  for (int i = 0; i < n; ++i) {
    out.push_back({scale[0] * rng.Normal(), scale[1] * rng.Normal(), scale[2] * rng.Normal()});
  }
  return out;
}

TEST(PcaTest, AxisAlignedDataGivesSignedPermutation) {
  Rng rng(5);
  const auto data = AnisotropicSamples(rng, 4000);
  const PcaModel m = PcaFit(data, 3);
  const int order[3] = {1, 2, 0};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      EXPECT_NEAR(std::abs(m.Row(r)[c]), c == order[r] ? 1.0 : 0.0, 0.05);
    }
    EXPECT_GT(m.Row(r)[order[r]], 0.0);  // sign convention
  }
  EXPECT_GE(m.eigenvalues[0], m.eigenvalues[1]);
  EXPECT_GE(m.eigenvalues[1], m.eigenvalues[2]);
}

TEST(PcaTest, TwoClustersAlongOneAxis) {
  Rng rng(6);
  std::vector<std::vector<double>> data;
  for (int i = 0; i < 400; ++i) {
    const double center = i % 2 == 0 ? -5.0 : 5.0;
    data.push_back({0.1 * rng.Normal(), center + 0.1 * rng.Normal(), 0.1 * rng.Normal()});
  }
  // Oracle: the top eigenvector of the sample covariance, by power iteration.
  std::vector<double> mean(3, 0.0);
  for (const auto& v : data) for (int i = 0; i < 3; ++i) mean[i] += v[i] / data.size();
  double cov[3][3] = {};
  for (const auto& v : data) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) cov[i][j] += (v[i] - mean[i]) * (v[j] - mean[j]);
    }
  }
  std::vector<double> e = {1.0, 1.0, 1.0};
  for (int it = 0; it < 200; ++it) {
    std::vector<double> next(3, 0.0);
    for (int i = 0; i < 3; ++i) for (int j = 0; j < 3; ++j) next[i] += cov[i][j] * e[j];
    const double n = std::sqrt(std::inner_product(next.begin(), next.end(), next.begin(), 0.0));
    for (int i = 0; i < 3; ++i) e[i] = next[i] / n;
  }
  const PcaModel m = PcaFit(data, 1);
  const double cosine =
      std::abs(std::inner_product(e.begin(), e.end(), m.Row(0).begin(), 0.0));
  EXPECT_LT(std::acos(std::min(1.0, cosine)), 1e-6);
  EXPECT_LT(std::acos(std::min(1.0, std::abs(m.Row(0)[1]))), 1e-2);
}

TEST(PcaTest, DeterministicAndMeanMapsToZero) {
  Rng rng(8);
  const auto data = AnisotropicSamples(rng, 200);
  const PcaModel a = PcaFit(data, 2);
  EXPECT_EQ(a, PcaFit(data, 2));
  for (double v : PcaProject(a, a.mean)) EXPECT_EQ(v, 0.0);
}

TEST(PcaTest, IdentityBasisLeavesVectorsUnchanged) {
  PcaModel m;
  m.input_dim = m.output_dim = 2;
  m.mean = {0.0, 0.0};
  m.basis = {1.0, 0.0, 0.0, 1.0};
  m.eigenvalues = {1.0, 1.0};
  DescriptorSet ds;
  ds.image_width = ds.image_height = 4;
  ds.descriptors.push_back({{0.25, -3.0}, {1, 1, 2, 2}});
  EXPECT_EQ(PcaApply(m, ds), ds);
  DescriptorSet bad = ds;
  bad.descriptors[0].values.push_back(1.0);
  EXPECT_THROW(PcaApply(m, bad), DimError);
}

TEST(PcaTest, WhiteningGivesUnitVariance) {
  Rng rng(9);
  const auto data = AnisotropicSamples(rng, 3000);
  const PcaModel m = PcaFit(data, 3, true);
  std::vector<double> var(3, 0.0);
  for (const auto& v : data) {
    const auto p = PcaProject(m, v);
    for (int i = 0; i < 3; ++i) var[i] += p[i] * p[i] / data.size();
  }
  for (double v : var) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(PcaTest, DimErrors) {
  Rng rng(10);
  const auto data = AnisotropicSamples(rng, 50);
  EXPECT_THROW(PcaFit(data, 4), DimError);
  std::vector<std::vector<double>> flat;
  for (int i = 0; i < 50; ++i) flat.push_back({rng.Normal(), 0.0, 0.0});
  EXPECT_THROW(PcaFit(flat, 2), DimError);
  EXPECT_NO_THROW(PcaFit(flat, 1));
}

TEST(DescriptorIoTest, RoundTrip) {
  testing::TempDir dir("desc");
  Rng rng(11);
  const DescriptorSet ds = testing::RandomDescriptors(7, 5, 40, 30, 8, rng);
  SaveDescriptorSet(ds, dir.path() / "a.desc");
  EXPECT_EQ(LoadDescriptorSet(dir.path() / "a.desc"), ds);
  WriteFileBytes(dir.path() / "bad.desc", "DESC1\x01");
  EXPECT_THROW(LoadDescriptorSet(dir.path() / "bad.desc"), ParseError);
}

}  // namespace
}  // namespace fvlrp
