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


#include "fvlrp/gmm.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fvlrp/errors.h"
#include "fvlrp/rng.h"
#include "test_util.h"

namespace fvlrp {
namespace {

GmmModel TwoComponent(double mu, double sigma, int D = 1) {
  GmmModel m;
  m.num_components = 2;
  m.dim = D;
  m.weights = {0.5, 0.5};
  for (int r = 0; r < D; ++r) m.means.push_back(-mu);
  for (int r = 0; r < D; ++r) m.means.push_back(mu);
  m.sigmas.assign(2 * D, sigma);
  return m;
}

TEST(GmmTest, SingleComponentResponsibility) {
  GmmModel m;
  m.num_components = 1;
  m.dim = 2;
  m.weights = {1.0};
  m.means = {0.3, -1.0};
  m.sigmas = {0.2, 2.0};
  for (double x : {-50.0, 0.0, 3.0}) {
    const std::vector<double> l = {x, x};
    EXPECT_EQ(Responsibilities(m, l), std::vector<double>({1.0}));
  }
}

TEST(GmmTest, SymmetricPointSplitsEvenly) {
  const auto g = Responsibilities(TwoComponent(1.0, 0.7, 3), std::vector<double>(3, 0.0));
  EXPECT_DOUBLE_EQ(g[0], 0.5);
  EXPECT_DOUBLE_EQ(g[1], 0.5);
}

TEST(GmmTest, FarComponentsGiveHardAssignment) {
  const GmmModel m = TwoComponent(5.0, 1.0);  // 10 sigma apart
  const auto g = Responsibilities(m, std::vector<double>{-5.0});
  // Hand oracle: ratio exp(-(10)^2 / 2) for the far component.
  EXPECT_GE(g[0], 1.0 - 1e-10);
  EXPECT_NEAR(g[1], std::exp(-50.0), 1e-30);
}

TEST(GmmTest, ExtremeDistanceStaysFinite) {
  const auto g = Responsibilities(TwoComponent(1.0, 1e-3), std::vector<double>{1e6});
  EXPECT_TRUE(std::isfinite(g[0]));
  EXPECT_NEAR(g[0] + g[1], 1.0, 1e-15);
}

TEST(GmmTest, StandardNormalLogLikelihood) {
  GmmModel m;
  m.num_components = 1;
  m.dim = 1;
  m.weights = {1.0};
  m.means = {0.0};
  m.sigmas = {1.0};
  const std::vector<std::vector<double>> data = {{0.0}};
  EXPECT_NEAR(LogLikelihood(m, data), -0.9189385332046727, 1e-12);
  EXPECT_NEAR(LogLikelihood(m, data), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
  const std::vector<std::vector<double>> twice = {{0.0}, {0.0}};
  EXPECT_DOUBLE_EQ(LogLikelihood(m, twice), 2.0 * LogLikelihood(m, data));
}

TEST(GmmTest, DimMismatch) {
  const GmmModel m = TwoComponent(1.0, 1.0, 2);
  EXPECT_THROW(Responsibilities(m, std::vector<double>{1.0}), DimError);
  const std::vector<std::vector<double>> data = {{1.0}};
  EXPECT_THROW(LogLikelihood(m, data), DimError);
}

TEST(GmmTest, ValidateRejectsBadModels) {
  GmmModel m = TwoComponent(1.0, 1.0);
  m.weights = {0.6, 0.6};
  EXPECT_THROW(m.Validate(), ValidationError);
  m = TwoComponent(1.0, 0.0);
  EXPECT_THROW(m.Validate(), ValidationError);
}

TEST(EmTest, SingleComponentClosedForm) {
  Rng rng(1);
  std::vector<std::vector<double>> data;
  for (int i = 0; i < 500; ++i) data.push_back({2.0 + rng.Normal(), -1.0 + 3.0 * rng.Normal()});
  EmOptions opts;
  opts.num_components = 1;
  const GmmModel m = EmFit(data, opts).model;
  for (int r = 0; r < 2; ++r) {
    double mean = 0.0, var = 0.0;
    for (const auto& v : data) mean += v[r] / data.size();
    for (const auto& v : data) var += (v[r] - mean) * (v[r] - mean) / data.size();
    EXPECT_NEAR(m.means[r], mean, 1e-12);
    EXPECT_NEAR(m.sigmas[r], std::sqrt(var), 1e-12);
  }
  EXPECT_DOUBLE_EQ(m.weights[0], 1.0);
}

std::vector<std::vector<double>> TwoClusters(Rng& rng, int n) {
  std::vector<std::vector<double>> data;
  for (int i = 0; i < n; ++i) {
    const double c = i % 2 == 0 ? -4.0 : 4.0;
    data.push_back({c + rng.Normal(), c + rng.Normal()});
  }
  return data;
}

TEST(EmTest, RecoversSeparatedClusters) {
  Rng rng(2);
  const auto data = TwoClusters(rng, 4000);
  EmOptions opts;
  opts.num_components = 2;
  const EmResult r = EmFit(data, opts);
  int lo = r.model.means[0] < 0 ? 0 : 1;
  for (int d = 0; d < 2; ++d) {
    EXPECT_NEAR(r.model.Mean(lo)[d], -4.0, 0.1);
    EXPECT_NEAR(r.model.Mean(1 - lo)[d], 4.0, 0.1);
    EXPECT_NEAR(r.model.Sigma(lo)[d], 1.0, 0.1);
  }
  EXPECT_NEAR(r.model.weights[0], 0.5, 0.02);
  for (std::size_t i = 1; i < r.mean_log_likelihood.size(); ++i) {
    EXPECT_GE(r.mean_log_likelihood[i], r.mean_log_likelihood[i - 1] - 1e-12);
  }
}

TEST(EmTest, DeterministicInSeed) {
  Rng rng(3);
  const auto data = TwoClusters(rng, 300);
  EmOptions opts;
  opts.num_components = 3;
  opts.seed = 17;
  EXPECT_EQ(EmFit(data, opts).model, EmFit(data, opts).model);
}

TEST(EmTest, FitErrors) {
  EmOptions opts;
  opts.num_components = 3;
  const std::vector<std::vector<double>> two = {{1.0}, {2.0}};
  EXPECT_THROW(EmFit(two, opts), FitError);
  const std::vector<std::vector<double>> same(10, std::vector<double>{1.0});
  opts.num_components = 2;
  EXPECT_THROW(EmFit(same, opts), FitError);
}

TEST(SampleTest, DegenerateSigmaReturnsMean) {
  GmmModel m;
  m.num_components = 1;
  m.dim = 2;
  m.weights = {1.0};
  m.means = {1.5, -2.0};
  m.sigmas = {1e-12, 1e-12};
  Rng rng(4);
  const auto s = Sample(m, rng);
  EXPECT_NEAR(s[0], 1.5, 1e-9);
  EXPECT_NEAR(s[1], -2.0, 1e-9);
}

TEST(SampleTest, EmpiricalMeanWithinCltBound) {
  Rng init(5);
  const GmmModel m = testing::RandomGmm(3, 2, init);
  Rng rng(6);
  const int n = 100000;
  std::vector<double> sum(2, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto s = Sample(m, rng);
    for (int r = 0; r < 2; ++r) sum[r] += s[r];
  }
  for (int r = 0; r < 2; ++r) {
    double mean = 0.0, second = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double mu = m.Mean(k)[r], sd = m.Sigma(k)[r];
      mean += m.weights[k] * mu;
      second += m.weights[k] * (sd * sd + mu * mu);
    }
    const double sd = std::sqrt(second - mean * mean);
    EXPECT_NEAR(sum[r] / n, mean, 4.0 * sd / std::sqrt(n));
  }
}

TEST(SampleTest, SameSeedSameSample) {
  Rng init(7);
  const GmmModel m = testing::RandomGmm(4, 3, init);
  Rng a(8), b(8);
  EXPECT_EQ(Sample(m, a), Sample(m, b));
}

}  // namespace
}  // namespace fvlrp
