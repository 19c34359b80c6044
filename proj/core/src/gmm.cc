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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fvlrp/errors.h"
#include "fvlrp/parallel.h"

namespace fvlrp {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

void CheckDim(const GmmModel& m, std::size_t n) {
  if (static_cast<int>(n) != m.dim) {
    throw DimError("descriptor dim " + std::to_string(n) + " != GMM dim " +
                   std::to_string(m.dim));
  }
}

double SquaredDistance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Draws an index with probability proportional to `weights` (non-negative,
// positive total).
std::size_t DrawProportional(std::span<const double> weights, double total, Rng& rng) {
  const double target = rng.Uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    acc += weights[i];
    if (target < acc) return i;
  }
  return last_positive;
}

// M-step from responsibilities (n x K row-major). Accumulates in sample
// order so the result is independent of thread count.
void MaximizationStep(std::span<const std::vector<double>> data,
                      const std::vector<double>& resp, std::span<const double> var_floor,
                      GmmModel& m) {
  const int K = m.num_components;
  const int D = m.dim;
  const std::size_t n = data.size();
  std::vector<double> mass(K, 0.0);
  std::vector<double> sum(std::size_t(K) * D, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < K; ++k) {
      const double g = resp[i * K + k];
      if (g == 0.0) continue;
      mass[k] += g;
      double* s = sum.data() + std::size_t(k) * D;
      for (int d = 0; d < D; ++d) s[d] += g * data[i][d];
    }
  }
  for (int k = 0; k < K; ++k) {
    if (mass[k] <= 0.0) {
      throw FitError("component " + std::to_string(k) + " lost all responsibility");
    }
    for (int d = 0; d < D; ++d) {
      m.means[std::size_t(k) * D + d] = sum[std::size_t(k) * D + d] / mass[k];
    }
  }
  std::vector<double> sq(std::size_t(K) * D, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < K; ++k) {
      const double g = resp[i * K + k];
      if (g == 0.0) continue;
      const double* mu = m.means.data() + std::size_t(k) * D;
      double* s = sq.data() + std::size_t(k) * D;
      for (int d = 0; d < D; ++d) {
        const double dev = data[i][d] - mu[d];
        s[d] += g * dev * dev;
      }
    }
  }
  double total = 0.0;
  for (int k = 0; k < K; ++k) total += mass[k];
  for (int k = 0; k < K; ++k) {
    m.weights[k] = mass[k] / total;
    for (int d = 0; d < D; ++d) {
      const double var = std::max(sq[std::size_t(k) * D + d] / mass[k], var_floor[d]);
      m.sigmas[std::size_t(k) * D + d] = std::sqrt(var);
    }
  }
}

}  // namespace

void GmmModel::Validate() const {
  if (num_components < 1 || dim < 1) throw ValidationError("empty GMM");
  const std::size_t kd = std::size_t(num_components) * dim;
  if (weights.size() != std::size_t(num_components) || means.size() != kd ||
      sigmas.size() != kd) {
    throw ValidationError("GMM parameter sizes inconsistent with K and D");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("invalid weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("weights do not sum to 1");
  for (double s : sigmas) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("invalid sigma");
  }
  for (double v : means) {
    if (!std::isfinite(v)) throw ValidationError("non-finite mean");
  }
}

void ComponentLogDensities(const GmmModel& m, std::span<const double> l,
                           std::span<double> out) {
  CheckDim(m, l.size());
  if (static_cast<int>(out.size()) != m.num_components) {
    throw DimError("output span must hold one value per component");
  }
  for (int k = 0; k < m.num_components; ++k) {
    const auto mu = m.Mean(k);
    const auto sigma = m.Sigma(k);
    double acc = 0.0;
    for (int d = 0; d < m.dim; ++d) {
      const double z = (l[d] - mu[d]) / sigma[d];
      acc += kLog2Pi + 2.0 * std::log(sigma[d]) + z * z;
    }
    out[k] = std::log(m.weights[k]) - 0.5 * acc;
  }
}

double Responsibilities(const GmmModel& m, std::span<const double> l,
                        std::span<double> gamma) {
  ComponentLogDensities(m, l, gamma);
  const double top = *std::max_element(gamma.begin(), gamma.end());
  if (top == -std::numeric_limits<double>::infinity()) {
    throw DegenerateInputError("all components have zero density");
  }
  double s = 0.0;
  for (double v : gamma) s += std::exp(v - top);
  const double lse = top + std::log(s);
  for (double& v : gamma) v = std::exp(v - lse);
  return lse;
}

std::vector<double> Responsibilities(const GmmModel& m, std::span<const double> l) {
  std::vector<double> gamma(m.num_components);
  Responsibilities(m, l, gamma);
  return gamma;
}

double LogLikelihood(const GmmModel& m, std::span<const std::vector<double>> data) {
  std::vector<double> per(data.size());
  ParallelFor(data.size(), [&](std::size_t i) {
    std::vector<double> gamma(m.num_components);
    per[i] = Responsibilities(m, data[i], gamma);
  });
  double total = 0.0;
  for (double v : per) total += v;
  return total;
}

EmResult EmFit(std::span<const std::vector<double>> data, const EmOptions& opts) {
  const int K = opts.num_components;
  if (K < 1) throw FitError("K must be >= 1");
  if (data.size() < static_cast<std::size_t>(K)) {
    throw FitError("fewer samples (" + std::to_string(data.size()) +
                   ") than components (" + std::to_string(K) + ")");
  }
  const int D = static_cast<int>(data[0].size());
  if (D < 1) throw FitError("zero-dimensional data");
  for (const auto& x : data) {
    if (static_cast<int>(x.size()) != D) throw DimError("ragged data");
  }
  const std::size_t n = data.size();

  // Variance floor from the per-dimension data variance.
  std::vector<double> mean(D, 0.0);
  for (const auto& x : data) {
    for (int d = 0; d < D; ++d) mean[d] += x[d];
  }
  for (double& v : mean) v /= static_cast<double>(n);
  std::vector<double> var_floor(D, 0.0);
  for (const auto& x : data) {
    for (int d = 0; d < D; ++d) {
      const double dev = x[d] - mean[d];
      var_floor[d] += dev * dev;
    }
  }
  for (double& v : var_floor) v = 1e-4 * std::max(v / static_cast<double>(n), 1e-8);

  // k-means++ seeding.
  Rng rng(opts.seed);
  std::vector<std::size_t> centers;
  centers.push_back(rng.Index(n));
  std::vector<double> dist2(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist2[i] = SquaredDistance(data[i], data[centers[0]]);
  }
  while (static_cast<int>(centers.size()) < K) {
    double total = 0.0;
    for (double v : dist2) total += v;
    if (total <= 0.0) {
      throw FitError("degenerate data: fewer distinct samples than components");
    }
    const std::size_t c = DrawProportional(dist2, total, rng);
    centers.push_back(c);
    for (std::size_t i = 0; i < n; ++i) {
      dist2[i] = std::min(dist2[i], SquaredDistance(data[i], data[c]));
    }
  }

  GmmModel m;
  m.num_components = K;
  m.dim = D;
  m.weights.assign(K, 1.0 / K);
  m.means.assign(std::size_t(K) * D, 0.0);
  m.sigmas.assign(std::size_t(K) * D, 1.0);

  // Hard assignment to the nearest center, lowest index on ties.
  std::vector<double> resp(n * K, 0.0);
  ParallelFor(n, [&](std::size_t i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      const double d = SquaredDistance(data[i], data[centers[k]]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    resp[i * K + best] = 1.0;
  });
  MaximizationStep(data, resp, var_floor, m);

  EmResult result;
  std::vector<double> loglik(n);
  auto expectation = [&]() {
    ParallelFor(n, [&](std::size_t i) {
      loglik[i] = Responsibilities(
          m, data[i], std::span<double>(resp.data() + i * K, std::size_t(K)));
    });
    double total = 0.0;
    for (double v : loglik) total += v;
    return total / static_cast<double>(n);
  };

  double current = expectation();
  result.mean_log_likelihood.push_back(current);
  for (int it = 0; it < opts.max_iterations; ++it) {
    MaximizationStep(data, resp, var_floor, m);
    const double next = expectation();
    result.mean_log_likelihood.push_back(next);
    result.iterations = it + 1;
    const double gain = next - current;
    current = next;
    if (gain < opts.tolerance) break;
  }
  result.model = std::move(m);
  return result;
}

std::vector<double> Sample(const GmmModel& m, Rng& rng) {
  double total = 0.0;
  for (double w : m.weights) total += w;
  const std::size_t k = DrawProportional(m.weights, total, rng);
  const auto mu = m.Mean(static_cast<int>(k));
  const auto sigma = m.Sigma(static_cast<int>(k));
  std::vector<double> out(m.dim);
  for (int d = 0; d < m.dim; ++d) out[d] = mu[d] + sigma[d] * rng.Normal();
  return out;
}

}  // namespace fvlrp
