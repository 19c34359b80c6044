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
#include <filesystem>
#include <span>
#include <vector>

#include "fvlrp/descriptors.h"
#include "fvlrp/gmm.h"

namespace fvlrp {

enum class Moment { kWeight, kMean, kSigma };

// One coordinate of a Fisher vector: which gradient block, which component,
// and which descriptor coordinate (always 0 for kWeight).
struct FvCoordinate {
  Moment moment = Moment::kWeight;
  int component = 0;
  int coordinate = 0;

  bool operator==(const FvCoordinate&) const = default;
};

// Layout of a (1 + 2D)K Fisher vector: K weight entries, then K concatenated
// D-blocks of mean gradients, then K concatenated D-blocks of sigma
// gradients. Zero-based: d = k; d = K + D k + r; d = (1 + D) K + D k + r.
class EmbeddingIndex {
 public:
  EmbeddingIndex(int num_components, int dim) : K_(num_components), D_(dim) {}

  int size() const { return (1 + 2 * D_) * K_; }
  int ToDim(const FvCoordinate& c) const;
  FvCoordinate FromDim(int d) const;

 private:
  int K_;
  int D_;
};

inline int FvLength(const GmmModel& m) { return (1 + 2 * m.dim) * m.num_components; }

// Per-descriptor embedding Psi(l):
//   weight: (gamma_k - pi_k) / sqrt(pi_k)
//   mean:   gamma_k (l - mu_k) / (sigma_k sqrt(pi_k))
//   sigma:  gamma_k ((l - mu_k)^2 / sigma_k^2 - 1) / (sqrt(2) sqrt(pi_k))
// `gamma` is scratch of size K; `out` has FvLength(m) entries.
void EmbedDescriptorInto(const GmmModel& m, std::span<const double> l,
                         std::span<double> gamma, std::span<double> out);
std::vector<double> EmbedDescriptor(const GmmModel& m, std::span<const double> l);

// Raw FV: mean of per-descriptor embeddings, summed in descriptor order.
// Throws EmptyInputError for an empty set.
std::vector<double> Aggregate(const GmmModel& m, const DescriptorSet& ds);

// Improved FV: signed square root, then l2 normalization. Zero maps to zero.
std::vector<double> Improve(std::span<const double> x);

struct HellingerCheck {
  double lhs = 0.0;  // <Improve(x), Improve(y)>
  double rhs = 0.0;  // sum_d sign(x_d y_d) sqrt(|x_d|/|x|_1 * |y_d|/|y|_1)
};

// Evaluates both sides of the improved-FV / Hellinger kernel identity
// independently. Throws DegenerateInputError for a zero input, DimError on
// length mismatch.
HellingerCheck CheckHellinger(std::span<const double> x, std::span<const double> y);

// FVEC1 cache: "FVEC1", u32 K, u32 D, then (1 + 2D)K f64 values.
void SaveFisherVector(std::span<const double> x, int num_components, int dim,
                      const std::filesystem::path& path);
struct StoredFisherVector {
  int num_components = 0;
  int dim = 0;
  std::vector<double> values;
};
StoredFisherVector LoadFisherVector(const std::filesystem::path& path);

}  // namespace fvlrp
