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


#include "fvlrp/fisher.h"

#include <gtest/gtest.h>

#include <cmath>

#include "fvlrp/errors.h"
#include "fvlrp/rng.h"
#include "test_util.h"

namespace fvlrp {
namespace {

GmmModel OneComponent(std::vector<double> mu, std::vector<double> sigma) {
  GmmModel m;
  m.num_components = 1;
  m.dim = static_cast<int>(mu.size());
  m.weights = {1.0};
  m.means = std::move(mu);
  m.sigmas = std::move(sigma);
  return m;
}

// Straight transcription of the per-descriptor mapping, used as an oracle.
std::vector<double> EmbedOracle(const GmmModel& m, const std::vector<double>& l) {
  const int K = m.num_components, D = m.dim;
  std::vector<double> logp(K);
  double mx = -INFINITY;
  for (int k = 0; k < K; ++k) {
    double s = std::log(m.weights[k]);
    for (int r = 0; r < D; ++r) {
      const double z = (l[r] - m.Mean(k)[r]) / m.Sigma(k)[r];
      s += -0.5 * z * z - std::log(m.Sigma(k)[r]) - 0.5 * std::log(2 * M_PI);
    }
    logp[k] = s;
    mx = std::max(mx, s);
  }
  double tot = 0.0;
  for (double v : logp) tot += std::exp(v - mx);
  std::vector<double> out((1 + 2 * D) * K);
  for (int k = 0; k < K; ++k) {
    const double g = std::exp(logp[k] - mx) / tot, sp = std::sqrt(m.weights[k]);
    out[k] = (g - m.weights[k]) / sp;
    for (int r = 0; r < D; ++r) {
      const double z = (l[r] - m.Mean(k)[r]) / m.Sigma(k)[r];
      out[K + D * k + r] = g * z / sp;
      out[(1 + D) * K + D * k + r] = g * (z * z - 1) / (std::sqrt(2.0) * sp);
    }
  }
  return out;
}

TEST(EmbeddingIndexTest, LayoutAndInverse) {
  const EmbeddingIndex idx(3, 4);
  EXPECT_EQ(idx.size(), 27);
  EXPECT_EQ(idx.ToDim({Moment::kWeight, 2, 0}), 2);
  EXPECT_EQ(idx.ToDim({Moment::kMean, 1, 3}), 3 + 4 + 3);
  EXPECT_EQ(idx.ToDim({Moment::kSigma, 0, 1}), 15 + 1);
  for (int d = 0; d < idx.size(); ++d) EXPECT_EQ(idx.ToDim(idx.FromDim(d)), d);
}

TEST(EmbedTest, SingleComponentWeightEntryIsZero) {
  const auto e = EmbedDescriptor(OneComponent({0.0, 1.0}, {1.0, 2.0}), std::vector<double>{3.0, -1.0});
  EXPECT_EQ(e[0], 0.0);
}

TEST(EmbedTest, DescriptorAtMeanHasZeroMeanBlock) {
  Rng rng(1);
  const GmmModel m = testing::RandomGmm(3, 2, rng);
  for (int k = 0; k < 3; ++k) {
    const std::vector<double> l(m.Mean(k).begin(), m.Mean(k).end());
    const auto e = EmbedDescriptor(m, l);
    EXPECT_EQ(e[3 + 2 * k], 0.0);
    EXPECT_EQ(e[3 + 2 * k + 1], 0.0);
  }
}

TEST(EmbedTest, OneSigmaAway) {
  const GmmModel m = OneComponent({1.0, -2.0}, {0.5, 2.0});
  const auto e = EmbedDescriptor(m, std::vector<double>{1.5, 0.0});
  EXPECT_NEAR(e[1], 1.0, 1e-15);
  EXPECT_NEAR(e[2], 1.0, 1e-15);
  EXPECT_NEAR(e[3], 0.0, 1e-15);
  EXPECT_NEAR(e[4], 0.0, 1e-15);
}

TEST(EmbedTest, HardAssignmentWeightBlock) {
  GmmModel m;
  m.num_components = 2;
  m.dim = 1;
  m.weights = {0.5, 0.5};
  m.means = {0.0, 100.0};
  m.sigmas = {1.0, 1.0};
  const auto e = EmbedDescriptor(m, std::vector<double>{0.0});
  EXPECT_NEAR(e[0], std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(e[1], -std::sqrt(0.5), 1e-15);
}

TEST(EmbedTest, MatchesOracle) {
  Rng rng(2);
  const GmmModel m = testing::RandomGmm(4, 3, rng);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> l = {rng.Normal(), rng.Normal(), rng.Normal()};
    const auto got = EmbedDescriptor(m, l);
    const auto want = EmbedOracle(m, l);
    for (std::size_t d = 0; d < got.size(); ++d) EXPECT_NEAR(got[d], want[d], 1e-12);
  }
  EXPECT_THROW(EmbedDescriptor(m, std::vector<double>{1.0}), DimError);
}

TEST(AggregateTest, MeanOfEmbeddings) {
  Rng rng(3);
  const GmmModel m = testing::RandomGmm(2, 2, rng);
  DescriptorSet ds = testing::RandomDescriptors(1, 2, 20, 20, 4, rng);
  EXPECT_EQ(Aggregate(m, ds), EmbedDescriptor(m, ds.descriptors[0].values));
  ds = testing::RandomDescriptors(6, 2, 20, 20, 4, rng);
  DescriptorSet doubled = ds;
  for (const auto& d : ds.descriptors) doubled.descriptors.push_back(d);
  const auto a = Aggregate(m, ds), b = Aggregate(m, doubled);
  for (std::size_t d = 0; d < a.size(); ++d) EXPECT_NEAR(a[d], b[d], 1e-14);
  EXPECT_THROW(Aggregate(m, DescriptorSet{}), EmptyInputError);
}

TEST(AggregateTest, OpposedEmbeddingsCancel) {
  // K = 1 with l = mu +- delta: the mean blocks cancel and the sigma blocks
  // are equal, so only those survive.
  const GmmModel m = OneComponent({0.0}, {1.0});
  DescriptorSet ds;
  ds.descriptors.push_back({{1.0}, {}});
  ds.descriptors.push_back({{-1.0}, {}});
  const auto x = Aggregate(m, ds);
  EXPECT_EQ(x[0], 0.0);
  EXPECT_EQ(x[1], 0.0);
  EXPECT_EQ(x[2], 0.0);  // (1 - 1) / sqrt(2)
}

TEST(ImproveTest, HandExamples) {
  const auto a = Improve(std::vector<double>{4, -9, 0});
  EXPECT_NEAR(a[0], 2 / std::sqrt(13.0), 1e-15);
  EXPECT_NEAR(a[1], -3 / std::sqrt(13.0), 1e-15);
  EXPECT_EQ(a[2], 0.0);
  const auto b = Improve(std::vector<double>{3, 4});
  EXPECT_NEAR(b[0] * b[0] + b[1] * b[1], 1.0, 1e-15);
  EXPECT_NEAR(b[0] / b[1], std::sqrt(3.0) / 2.0, 1e-15);
  EXPECT_EQ(Improve(std::vector<double>{0, 0}), std::vector<double>({0, 0}));
}

TEST(HellingerTest, HandExamples) {
  auto h = CheckHellinger(std::vector<double>{1, 0}, std::vector<double>{1, 0});
  EXPECT_DOUBLE_EQ(h.lhs, 1.0);
  EXPECT_DOUBLE_EQ(h.rhs, 1.0);
  h = CheckHellinger(std::vector<double>{1, 1}, std::vector<double>{1, -1});
  EXPECT_NEAR(h.lhs, 0.0, 1e-16);
  EXPECT_NEAR(h.rhs, 0.0, 1e-16);
}

TEST(HellingerTest, RandomVectorsAgree) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(40), y(40);
    for (double& v : x) v = rng.Normal() * std::exp(rng.Normal());
    for (double& v : y) v = rng.Normal() * std::exp(rng.Normal());
    const auto h = CheckHellinger(x, y);
    EXPECT_NEAR(h.lhs, h.rhs, 1e-10);
  }
}

TEST(HellingerTest, Errors) {
  EXPECT_THROW(CheckHellinger(std::vector<double>{0, 0}, std::vector<double>{1, 0}),
               DegenerateInputError);
  EXPECT_THROW(CheckHellinger(std::vector<double>{1}, std::vector<double>{1, 0}), DimError);
}

TEST(FisherIoTest, RoundTrip) {
  testing::TempDir dir("fv");
  const std::vector<double> x = {0.1, -2.0, 3.5, 0.0, 1e-310};
  SaveFisherVector(x, 1, 2, dir.path() / "a.fv");
  const auto back = LoadFisherVector(dir.path() / "a.fv");
  EXPECT_EQ(back.num_components, 1);
  EXPECT_EQ(back.dim, 2);
  EXPECT_EQ(back.values, x);
}

}  // namespace
}  // namespace fvlrp
