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


#include "fvlrp/svm.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "fvlrp/errors.h"
#include "fvlrp/rng.h"
#include "test_util.h"

namespace fvlrp {
namespace {

SvmModel Linear(std::vector<double> w, double b) {
  SvmModel m;
  m.classes.push_back({"a", std::move(w), b, {}});
  return m;
}

TEST(ScoreTest, HandExamples) {
  EXPECT_DOUBLE_EQ(Score(Linear({0, 0, 0}, 0.3), std::vector<double>{5, -1, 2}, 0), 0.3);
  EXPECT_NEAR(Score(Linear({2, -1}, 0.5), std::vector<double>{0.6, 0.8}, 0), 0.9, 1e-15);
  EXPECT_THROW(Score(Linear({2, -1}, 0.5), std::vector<double>{1.0}, 0), DimError);
}

TEST(ScoreTest, LinearInParameters) {
  Rng rng(1);
  const SvmModel a = testing::RandomSvm(6, 1, rng), b = testing::RandomSvm(6, 1, rng);
  SvmModel sum = a;
  for (int d = 0; d < 6; ++d) sum.classes[0].w[d] += b.classes[0].w[d];
  sum.classes[0].b += b.classes[0].b;
  std::vector<double> x(6);
  for (double& v : x) v = rng.Normal();
  EXPECT_NEAR(Score(a, x, 0) + Score(b, x, 0), Score(sum, x, 0), 1e-12);
}

TEST(PredictTest, Thresholds) {
  SvmModel m;
  m.classes.push_back({"yes", {1.0}, -0.1, {}});
  m.classes.push_back({"no", {-1.0}, 0.8, {}});
  const std::vector<double> x = {1.0};
  auto p = PredictMultilabel(m, x);
  EXPECT_NEAR(p.scores[0], 0.9, 1e-15);
  EXPECT_NEAR(p.scores[1], -0.2, 1e-15);
  EXPECT_EQ(p.labels, std::vector<bool>({true, false}));
  const std::vector<double> inf(2, std::numeric_limits<double>::infinity());
  p = PredictMultilabel(m, x, inf);
  EXPECT_EQ(p.labels, std::vector<bool>({false, false}));
  EXPECT_THROW(m.ClassIndex("maybe"), KeyError);
  EXPECT_EQ(m.ClassIndex("no"), 1);
}

TEST(EerTest, MatchesBruteForceSweep) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
      labels.push_back(i % 3 == 0 ? 1 : -1);
      scores.push_back(rng.Normal() + (labels.back() > 0 ? 1.0 : 0.0));
    }
    const double tau = EerThreshold(scores, labels);
    auto gap = [&](double th) {
      double fp = 0, fn = 0, np = 0, nn = 0;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] > 0) {
          ++np;
          fn += scores[i] <= th;
        } else {
          ++nn;
          fp += scores[i] > th;
        }
      }
      return std::abs(fp / nn - fn / np);
    };
    double best = INFINITY;
    std::vector<double> cuts = scores;
    cuts.push_back(-INFINITY);
    for (double c : cuts) best = std::min(best, gap(c));
    EXPECT_NEAR(gap(tau), best, 1e-15);
    // Within one sample of equal rates.
    EXPECT_LE(gap(tau), 1.0 / 20 + 1e-12);
  }
}

TEST(TrainTest, SeparablePair) {
  const std::vector<std::vector<double>> x = {{1.0, 0.0}, {-1.0, 0.0}};
  const SvmModel m = SvmTrain(x, {"a"}, {{1, -1}}, SvmTrainOptions{});
  EXPECT_GT(Score(m, x[0], 0), 0.0);
  EXPECT_LT(Score(m, x[1], 0), 0.0);
}

std::vector<std::vector<double>> Blobs(Rng& rng, int n, std::vector<int>* y) {
  std::vector<std::vector<double>> x;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2 == 0 ? 1 : -1;
    y->push_back(label);
    x.push_back({0.8 * label + rng.Normal(), rng.Normal(), 0.3 * label + rng.Normal()});
  }
  return x;
}

TEST(TrainTest, DuplicatedDataGivesSameScores) {
  Rng rng(3);
  std::vector<int> y;
  const auto x = Blobs(rng, 50, &y);
  auto x2 = x;
  x2.insert(x2.end(), x.begin(), x.end());
  auto y2 = y;
  y2.insert(y2.end(), y.begin(), y.end());
  SvmTrainOptions opts;
  opts.epochs = 300;
  const SvmModel a = SvmTrain(x, {"a"}, {y}, opts);
  const SvmModel b = SvmTrain(x2, {"a"}, {y2}, opts);
  for (const auto& v : x) EXPECT_NEAR(Score(a, v, 0), Score(b, v, 0), 1e-6);
}

TEST(TrainTest, DeterministicAndObjectiveNonIncreasing) {
  Rng rng(4);
  std::vector<int> y;
  const auto x = Blobs(rng, 80, &y);
  std::vector<int> y2;
  for (std::size_t i = 0; i < y.size(); ++i) y2.push_back(x[i][1] > 0 ? 1 : -1);
  SvmTrainOptions opts;
  opts.seed = 9;
  SvmTrainReport report;
  const SvmModel a = SvmTrain(x, {"a", "b"}, {y, y2}, opts, &report);
  EXPECT_EQ(a, SvmTrain(x, {"a", "b"}, {y, y2}, opts));
  ASSERT_EQ(report.objective_history.size(), 2u);
  for (const auto& h : report.objective_history) {
    ASSERT_EQ(h.size(), static_cast<std::size_t>(opts.epochs + 1));
    for (std::size_t t = 1; t < h.size(); ++t) EXPECT_LE(h[t], h[t - 1] + 1e-9);
    EXPECT_LT(h.back(), h.front());
  }
  EXPECT_NEAR(report.objective_history[0].back(),
              SvmObjective(a.classes[0], x, y, 1.0 / opts.C), 1e-12);
}

TEST(TrainTest, DualViewMatchesPrimal) {
  Rng rng(5);
  std::vector<int> y;
  const auto x = Blobs(rng, 40, &y);
  SvmTrainOptions opts;
  opts.keep_dual = true;
  const SvmModel m = SvmTrain(x, {"a"}, {y}, opts);
  ASSERT_TRUE(m.HasDualView());
  const SvmClassifier& c = m.classes[0];
  for (int d = 0; d < 3; ++d) {
    double w = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) w += c.dual_coef[i] * x[i][d];
    EXPECT_NEAR(w, c.w[d], 1e-8);
  }
  for (const auto& v : x) {
    const double p = Score(m, v, 0);
    EXPECT_LE(std::abs(DualScore(m, v, 0) - p), 1e-8 * std::max(1.0, std::abs(p)));
  }
}

TEST(TrainTest, SingleClassLabelsRejected) {
  const std::vector<std::vector<double>> x = {{1.0}, {2.0}};
  EXPECT_THROW(SvmTrain(x, {"a"}, {{1, 1}}, SvmTrainOptions{}), TrainError);
  EXPECT_THROW(SvmTrain(x, {"a"}, {{-1, -1}}, SvmTrainOptions{}), TrainError);
}

}  // namespace
}  // namespace fvlrp
