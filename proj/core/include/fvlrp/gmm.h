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
#include <vector>

#include "fvlrp/rng.h"

namespace fvlrp {

// K diagonal-covariance Gaussians over D-dimensional descriptors. Means and
// standard deviations are stored row-major, one D-row per component.
struct GmmModel {
  int num_components = 0;
  int dim = 0;
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> sigmas;

  std::span<const double> Mean(int k) const {
    return {means.data() + std::size_t(k) * dim, std::size_t(dim)};
  }
  std::span<const double> Sigma(int k) const {
    return {sigmas.data() + std::size_t(k) * dim, std::size_t(dim)};
  }

  // Throws ValidationError: weights on the simplex (1e-12), strictly positive
  // sigmas, consistent sizes, finite values.
  void Validate() const;

  bool operator==(const GmmModel&) const = default;
};

// Per-component log(pi_k N(l; mu_k, sigma_k)), written into `out` (size K).
void ComponentLogDensities(const GmmModel& m, std::span<const double> l,
                           std::span<double> out);

// Posterior gamma_k(l), computed with log-sum-exp. Returns log p(l).
double Responsibilities(const GmmModel& m, std::span<const double> l,
                        std::span<double> gamma);
std::vector<double> Responsibilities(const GmmModel& m, std::span<const double> l);

// Sum over samples of log sum_k pi_k N(l; mu_k, sigma_k).
double LogLikelihood(const GmmModel& m, std::span<const std::vector<double>> data);

struct EmOptions {
  int num_components = 8;
  std::uint64_t seed = 1;
  int max_iterations = 100;
  // Stop once the mean per-sample log-likelihood improves by less than this.
  double tolerance = 1e-6;
};

struct EmResult {
  GmmModel model;
  // Mean per-sample log-likelihood after the initial hard M-step and after
  // every EM iteration.
  std::vector<double> mean_log_likelihood;
  int iterations = 0;
};

// k-means++ seeding, one hard-assignment M-step, then EM until convergence.
// Variances are floored at 1e-4 * max(per-dim data variance, 1e-8). Throws
// FitError if there are fewer samples (or distinct samples) than K.
EmResult EmFit(std::span<const std::vector<double>> data, const EmOptions& opts);

// Draws k with probability pi_k, then mu_k + sigma_k * N(0, I).
std::vector<double> Sample(const GmmModel& m, Rng& rng);

}  // namespace fvlrp
