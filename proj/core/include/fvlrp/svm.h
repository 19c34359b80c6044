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
#include <span>
#include <string>
#include <vector>

namespace fvlrp {

// One-vs-rest linear classifier for one class: f(x) = w . x + b.
struct SvmClassifier {
  std::string name;
  std::vector<double> w;
  double b = 0.0;
  // Optional dual view: w = sum_i dual_coef[i] * support[i] and
  // b = sum_i dual_coef[i], where dual_coef[i] = alpha_i * y_i.
  std::vector<double> dual_coef;

  bool operator==(const SvmClassifier&) const = default;
};

struct SvmModel {
  std::vector<SvmClassifier> classes;
  double C = 1.0;
  int epochs = 200;
  std::uint64_t seed = 1;
  // Training features backing the dual view; empty when not stored.
  std::vector<std::vector<double>> support;

  // Throws KeyError for an unknown class name.
  int ClassIndex(const std::string& name) const;
  bool HasDualView() const { return !support.empty(); }

  bool operator==(const SvmModel&) const = default;
};

struct SvmTrainOptions {
  double C = 1.0;
  int epochs = 200;
  std::uint64_t seed = 1;
  bool keep_dual = false;
};

struct SvmTrainReport {
  // Per class: objective of the returned candidate after each epoch
  // (index 0 is the zero model). Non-increasing by construction.
  std::vector<std::vector<double>> objective_history;
};

// Minimizes lambda/2 (|w|^2 + b^2) + 1/n sum_i max(0, 1 - y_i (w.x_i + b))
// per class with lambda = 1 / C, using full-batch subgradient steps of
// size 1/(lambda t), projection onto the ball of radius 1/sqrt(lambda), and
// running averaging of the iterates. The returned classifier is the
// averaged iterate with the lowest objective seen. labels[c][i] is +1/-1.
// Throws TrainError unless every class has positive and negative examples.
SvmModel SvmTrain(std::span<const std::vector<double>> features,
                  const std::vector<std::string>& class_names,
                  const std::vector<std::vector<int>>& labels,
                  const SvmTrainOptions& opts, SvmTrainReport* report = nullptr);

// Objective minimized by SvmTrain for one class.
double SvmObjective(const SvmClassifier& c, std::span<const std::vector<double>> features,
                    std::span<const int> labels, double lambda);

// f(x) = w . x + b, summed in index order. Throws DimError.
double Score(const SvmClassifier& c, std::span<const double> x);
double Score(const SvmModel& m, std::span<const double> x, int class_index);

// f(x) through the dual view: b + sum_i dual_coef[i] (support[i] . x).
double DualScore(const SvmModel& m, std::span<const double> x, int class_index);

struct MultilabelPrediction {
  std::vector<double> scores;
  std::vector<bool> labels;  // score_c > threshold_c
};

// thresholds may be empty (all zero) or one per class.
MultilabelPrediction PredictMultilabel(const SvmModel& m, std::span<const double> x,
                                       std::span<const double> thresholds = {});

// Threshold tau for the rule "positive iff score > tau" that minimizes
// |FPR - FNR| over all distinct cut points (ties: smallest tau). labels are
// +1/-1; both classes must be present.
double EerThreshold(std::span<const double> scores, std::span<const int> labels);

}  // namespace fvlrp
