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

#include <algorithm>
#include <cmath>
#include <limits>

#include "fvlrp/errors.h"
#include "fvlrp/parallel.h"

namespace fvlrp {
namespace {

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct ClassTrainResult {
  SvmClassifier classifier;
  std::vector<double> history;
};

ClassTrainResult TrainOneClass(std::span<const std::vector<double>> x,
                               std::span<const int> y, const SvmTrainOptions& opts) {
  const std::size_t n = x.size();
  const std::size_t dim = x[0].size();
  const double lambda = 1.0 / opts.C;
  const double radius = 1.0 / std::sqrt(lambda);

  // Current iterate (w, b) with its expansion coefficients, and the running
  // average of both.
  std::vector<double> w(dim, 0.0), w_avg(dim, 0.0);
  double b = 0.0, b_avg = 0.0;
  std::vector<double> coef(n, 0.0), coef_avg(n, 0.0);
  std::vector<double> step(dim);
  std::vector<char> violated(n);

  ClassTrainResult best;
  best.classifier.w.assign(dim, 0.0);
  best.classifier.dual_coef.assign(n, 0.0);
  SvmClassifier candidate;
  double best_obj = SvmObjective(best.classifier, x, y, lambda);
  best.history.push_back(best_obj);

  for (int t = 1; t <= opts.epochs; ++t) {
    const double eta = 1.0 / (lambda * t);
    const double shrink = 1.0 - 1.0 / t;
    for (std::size_t i = 0; i < n; ++i) {
      violated[i] = y[i] * (Dot(w, x[i]) + b) < 1.0;
    }
    std::fill(step.begin(), step.end(), 0.0);
    double step_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!violated[i]) continue;
      for (std::size_t d = 0; d < dim; ++d) step[d] += y[i] * x[i][d];
      step_b += y[i];
    }
    const double gain = eta / static_cast<double>(n);
    double norm2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      w[d] = shrink * w[d] + gain * step[d];
      norm2 += w[d] * w[d];
    }
    b = shrink * b + gain * step_b;
    norm2 += b * b;
    for (std::size_t i = 0; i < n; ++i) {
      coef[i] = shrink * coef[i] + (violated[i] ? gain * y[i] : 0.0);
    }
    const double norm = std::sqrt(norm2);
    if (norm > radius) {
      const double scale = radius / norm;
      for (double& v : w) v *= scale;
      b *= scale;
      for (double& v : coef) v *= scale;
    }

    const double keep = (t - 1.0) / t;
    for (std::size_t d = 0; d < dim; ++d) w_avg[d] = keep * w_avg[d] + w[d] / t;
    b_avg = keep * b_avg + b / t;
    for (std::size_t i = 0; i < n; ++i) coef_avg[i] = keep * coef_avg[i] + coef[i] / t;

    candidate.w = w_avg;
    candidate.b = b_avg;
    const double obj = SvmObjective(candidate, x, y, lambda);
    if (obj < best_obj) {
      best_obj = obj;
      best.classifier.w = w_avg;
      best.classifier.b = b_avg;
      best.classifier.dual_coef = coef_avg;
    }
    best.history.push_back(best_obj);
  }
  return best;
}

}  // namespace

int SvmModel::ClassIndex(const std::string& name) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].name == name) return static_cast<int>(i);
  }
  throw KeyError("unknown class '" + name + "'");
}

double SvmObjective(const SvmClassifier& c, std::span<const std::vector<double>> features,
                    std::span<const int> labels, double lambda) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    hinge += std::max(0.0, 1.0 - labels[i] * (Dot(c.w, features[i]) + c.b));
  }
  return 0.5 * lambda * (Dot(c.w, c.w) + c.b * c.b) +
         hinge / static_cast<double>(features.size());
}

SvmModel SvmTrain(std::span<const std::vector<double>> features,
                  const std::vector<std::string>& class_names,
                  const std::vector<std::vector<int>>& labels,
                  const SvmTrainOptions& opts, SvmTrainReport* report) {
  if (features.empty()) throw TrainError("no training examples");
  if (labels.size() != class_names.size()) {
    throw TrainError("one label vector per class required");
  }
  if (!(opts.C > 0.0) || opts.epochs < 0) throw TrainError("invalid C or epochs");
  const std::size_t dim = features[0].size();
  for (const auto& f : features) {
    if (f.size() != dim) throw DimError("ragged feature vectors");
  }
  for (std::size_t c = 0; c < labels.size(); ++c) {
    if (labels[c].size() != features.size()) {
      throw TrainError("label count mismatch for class '" + class_names[c] + "'");
    }
    bool pos = false, neg = false;
    for (int v : labels[c]) {
      if (v == 1) pos = true;
      else if (v == -1) neg = true;
      else throw TrainError("labels must be +1 or -1");
    }
    if (!pos || !neg) {
      throw TrainError("class '" + class_names[c] +
                       "' needs positive and negative examples");
    }
  }

  SvmModel model;
  model.C = opts.C;
  model.epochs = opts.epochs;
  model.seed = opts.seed;
  model.classes.resize(class_names.size());
  std::vector<std::vector<double>> histories(class_names.size());
  ParallelFor(class_names.size(), [&](std::size_t c) {
    auto result = TrainOneClass(features, labels[c], opts);
    result.classifier.name = class_names[c];
    if (!opts.keep_dual) result.classifier.dual_coef.clear();
    model.classes[c] = std::move(result.classifier);
    histories[c] = std::move(result.history);
  });
  if (opts.keep_dual) model.support.assign(features.begin(), features.end());
  if (report) report->objective_history = std::move(histories);
  return model;
}

double Score(const SvmClassifier& c, std::span<const double> x) {
  if (x.size() != c.w.size()) {
    throw DimError("feature length " + std::to_string(x.size()) +
                   " != weight length " + std::to_string(c.w.size()));
  }
  return Dot(c.w, x) + c.b;
}

double Score(const SvmModel& m, std::span<const double> x, int class_index) {
  return Score(m.classes.at(class_index), x);
}

double DualScore(const SvmModel& m, std::span<const double> x, int class_index) {
  const auto& c = m.classes.at(class_index);
  if (!m.HasDualView() || c.dual_coef.size() != m.support.size()) {
    throw ValidationError("model has no dual view");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < m.support.size(); ++i) {
    s += c.dual_coef[i] * Dot(m.support[i], x);
  }
  double b = 0.0;
  for (double a : c.dual_coef) b += a;
  return s + b;
}

MultilabelPrediction PredictMultilabel(const SvmModel& m, std::span<const double> x,
                                       std::span<const double> thresholds) {
  if (!thresholds.empty() && thresholds.size() != m.classes.size()) {
    throw DimError("one threshold per class required");
  }
  MultilabelPrediction out;
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    const double s = Score(m.classes[c], x);
    const double tau = thresholds.empty() ? 0.0 : thresholds[c];
    out.scores.push_back(s);
    out.labels.push_back(s > tau);
  }
  return out;
}

double EerThreshold(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw DimError("scores and labels must be non-empty and aligned");
  }
  std::size_t num_pos = 0;
  for (int l : labels) num_pos += l > 0;
  const std::size_t num_neg = labels.size() - num_pos;
  if (num_pos == 0 || num_neg == 0) {
    throw ValidationError("EER needs both positive and negative examples");
  }
  std::vector<double> cuts(scores.begin(), scores.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.insert(cuts.begin(), cuts.front() - 1.0);

  double best_tau = cuts.front();
  double best_gap = std::numeric_limits<double>::infinity();
  for (double tau : cuts) {
    std::size_t fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool predicted = scores[i] > tau;
      if (predicted && labels[i] < 0) ++fp;
      if (!predicted && labels[i] > 0) ++fn;
    }
    const double gap = std::abs(static_cast<double>(fp) / num_neg -
                                static_cast<double>(fn) / num_pos);
    if (gap < best_gap) {
      best_gap = gap;
      best_tau = tau;
    }
  }
  return best_tau;
}

}  // namespace fvlrp
