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

#include <span>
#include <string>
#include <vector>

#include "fvlrp/descriptors.h"
#include "fvlrp/gmm.h"
#include "fvlrp/imaging_io.h"
#include "fvlrp/svm.h"

namespace fvlrp {

// Relevance per improved-FV dimension for one class.
struct R3Map {
  std::vector<double> values;
  int class_index = 0;
  double score = 0.0;  // f(x)
};

// R3_d = w_d phi_d + b / N, N = FV length. Sums to f(x).
R3Map RelevanceR3(const SvmModel& m, std::span<const double> phi, int class_index);

// Same quantity through the stored support vectors:
// R3_d = sum_i alpha_i y_i phi(x_i)_d phi_d + b / N.
R3Map RelevanceR3Dual(const SvmModel& m, std::span<const double> phi, int class_index);

enum class R2Variant { kPlain, kEpsilon, kAbsolute };

struct R2Options {
  R2Variant variant = R2Variant::kEpsilon;
  double epsilon = 100.0;
};

std::string VariantName(R2Variant v);
R2Variant ParseVariant(const std::string& name);  // plain | eps | abs

// Relevance per local descriptor.
struct R2Map {
  std::vector<double> values;
  R2Options options;
  std::vector<int> zero_dims;  // Z(x): dims whose mapping is zero for every l
  double xi = 0.0;             // sum of R3 over Z(x), divided by |L|
};

// m_d(l) = Psi(l)_d, evaluated one descriptor row at a time so the
// |L| x FV-length matrix is never stored.
class MappingMatrixView {
 public:
  MappingMatrixView(const GmmModel& gmm, const DescriptorSet& ds);

  std::size_t num_descriptors() const { return ds_.size(); }
  int num_dims() const { return FvLengthOf(gmm_); }
  int num_components() const { return gmm_.num_components; }
  // Writes row l (all FV dims) into `out`; `gamma` is K scratch.
  void Row(std::size_t l, std::span<double> gamma, std::span<double> out) const;

 private:
  static int FvLengthOf(const GmmModel& m) { return (1 + 2 * m.dim) * m.num_components; }
  const GmmModel& gmm_;
  const DescriptorSet& ds_;
};

// Distributes R3 onto descriptors:
//   plain:    R2_l = sum_{d not in Z} R3_d m_d(l) / sum_l' m_d(l') + xi
//   epsilon:  denominator + eps * sgn(denominator), sgn(0) = +1
//   absolute: |m_d(l)| / sum_l' |m_d(l')|
// Z(x) is tested with exact zero comparison. The plain variant throws
// ZeroDenominatorError when a column outside Z(x) sums to exactly zero.
R2Map RelevanceR2(const R3Map& r3, const MappingMatrixView& view, const R2Options& opts);

// R1_p = sum over descriptors covering p of R2_l / |area(l)|, with areas
// clipped to the image. Throws ValidationError for an empty clipped area.
Heatmap RelevanceR1(const R2Map& r2, const DescriptorSet& ds, int width, int height);

// Models needed to classify and explain an image with the FV pipeline.
struct FvModels {
  int patch = 16;
  int stride = 4;
  PcaModel pca;
  GmmModel gmm;
  SvmModel svm;
};

// PCA-projected descriptors of an image.
DescriptorSet ProjectedDescriptors(const Image& img, const FvModels& models);

struct Explanation {
  Heatmap heatmap;
  R2Map r2;
  R3Map r3;
  double score = 0.0;
  DescriptorSet descriptors;       // PCA space, same order as r2
  std::vector<double> raw_fv;
  std::vector<double> improved_fv;
};

// extract -> project -> aggregate -> improve -> score -> R3 -> R2 -> R1.
Explanation Explain(const Image& img, const FvModels& models, int class_index,
                    const R2Options& opts);
Explanation ExplainDescriptors(const DescriptorSet& projected, int width, int height,
                               const FvModels& models, int class_index,
                               const R2Options& opts);

}  // namespace fvlrp
