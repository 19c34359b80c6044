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


#include "fvlrp/lrp_fv.h"

#include <cmath>

#include "fvlrp/errors.h"
#include "fvlrp/fisher.h"
#include "fvlrp/parallel.h"

namespace fvlrp {

R3Map RelevanceR3(const SvmModel& m, std::span<const double> phi, int class_index) {
  const auto& c = m.classes.at(class_index);
  if (phi.size() != c.w.size()) throw DimError("FV length does not match SVM weights");
  R3Map r3;
  r3.class_index = class_index;
  r3.score = Score(c, phi);
  const double bias_share = c.b / static_cast<double>(phi.size());
  r3.values.resize(phi.size());
  for (std::size_t d = 0; d < phi.size(); ++d) {
    r3.values[d] = c.w[d] * phi[d] + bias_share;
  }
  return r3;
}

R3Map RelevanceR3Dual(const SvmModel& m, std::span<const double> phi, int class_index) {
  const auto& c = m.classes.at(class_index);
  if (!m.HasDualView() || c.dual_coef.size() != m.support.size()) {
    throw ValidationError("model has no dual view");
  }
  if (phi.size() != c.w.size()) throw DimError("FV length does not match SVM weights");
  double b = 0.0;
  for (double a : c.dual_coef) b += a;
  R3Map r3;
  r3.class_index = class_index;
  r3.score = DualScore(m, phi, class_index);
  r3.values.assign(phi.size(), 0.0);
  for (std::size_t i = 0; i < m.support.size(); ++i) {
    for (std::size_t d = 0; d < phi.size(); ++d) {
      r3.values[d] += c.dual_coef[i] * m.support[i][d] * phi[d];
    }
  }
  const double bias_share = b / static_cast<double>(phi.size());
  for (double& v : r3.values) v += bias_share;
  return r3;
}

std::string VariantName(R2Variant v) {
  switch (v) {
    case R2Variant::kPlain:
      return "plain";
    case R2Variant::kEpsilon:
      return "eps";
    case R2Variant::kAbsolute:
      return "abs";
  }
  return "?";
}

R2Variant ParseVariant(const std::string& name) {
  if (name == "plain") return R2Variant::kPlain;
  if (name == "eps") return R2Variant::kEpsilon;
  if (name == "abs") return R2Variant::kAbsolute;
  throw UsageError("unknown variant '" + name + "' (expected plain, eps or abs)");
}

MappingMatrixView::MappingMatrixView(const GmmModel& gmm, const DescriptorSet& ds)
    : gmm_(gmm), ds_(ds) {}

void MappingMatrixView::Row(std::size_t l, std::span<double> gamma,
                            std::span<double> out) const {
  EmbedDescriptorInto(gmm_, ds_.descriptors.at(l).values, gamma, out);
}

R2Map RelevanceR2(const R3Map& r3, const MappingMatrixView& view, const R2Options& opts) {
  const std::size_t num_l = view.num_descriptors();
  const int num_d = view.num_dims();
  if (num_l == 0) throw EmptyInputError("no descriptors to receive relevance");
  if (static_cast<int>(r3.values.size()) != num_d) {
    throw DimError("R3 length does not match the mapping");
  }
  if (opts.variant == R2Variant::kEpsilon && !(opts.epsilon > 0.0)) {
    throw ValidationError("epsilon must be positive");
  }
  const bool absolute = opts.variant == R2Variant::kAbsolute;

  // Pass 1: column sums in descriptor order and the zero-column set.
  std::vector<double> column(num_d, 0.0);
  std::vector<char> nonzero(num_d, 0);
  {
    std::vector<double> gamma(view.num_components());
    std::vector<double> row(num_d);
    for (std::size_t l = 0; l < num_l; ++l) {
      view.Row(l, gamma, row);
      for (int d = 0; d < num_d; ++d) {
        const double m = row[d];
        if (m != 0.0) nonzero[d] = 1;
        column[d] += absolute ? std::abs(m) : m;
      }
    }
  }

  R2Map r2;
  r2.options = opts;
  double zero_mass = 0.0;
  std::vector<double> denom(num_d, 0.0);
  for (int d = 0; d < num_d; ++d) {
    if (!nonzero[d]) {
      r2.zero_dims.push_back(d);
      zero_mass += r3.values[d];
      continue;
    }
    switch (opts.variant) {
      case R2Variant::kPlain:
        if (column[d] == 0.0) {
          throw ZeroDenominatorError("mapping column " + std::to_string(d) +
                                     " cancels to zero");
        }
        denom[d] = column[d];
        break;
      case R2Variant::kEpsilon:
        denom[d] = column[d] + opts.epsilon * (column[d] >= 0.0 ? 1.0 : -1.0);
        break;
      case R2Variant::kAbsolute:
        denom[d] = column[d];
        break;
    }
  }
  r2.xi = zero_mass / static_cast<double>(num_l);

  // Pass 2: per-descriptor accumulation in dimension order.
  r2.values.assign(num_l, 0.0);
  ParallelFor(num_l, [&](std::size_t l) {
    std::vector<double> gamma(view.num_components());
    std::vector<double> m(num_d);
    view.Row(l, gamma, m);
    double acc = 0.0;
    for (int d = 0; d < num_d; ++d) {
      if (!nonzero[d]) continue;
      const double share = absolute ? std::abs(m[d]) : m[d];
      acc += r3.values[d] * share / denom[d];
    }
    r2.values[l] = acc + r2.xi;
  });
  return r2;
}

Heatmap RelevanceR1(const R2Map& r2, const DescriptorSet& ds, int width, int height) {
  if (r2.values.size() != ds.size()) {
    throw DimError("R2 map does not match the descriptor set");
  }
  Heatmap h(width, height);
  for (std::size_t l = 0; l < ds.size(); ++l) {
    const Area a = ClipArea(ds.descriptors[l].area, width, height);
    const int count = a.w * a.h;
    if (count == 0) throw ValidationError("receptive field outside the image");
    const double share = r2.values[l] / count;
    for (int y = a.y; y < a.y + a.h; ++y) {
      for (int x = a.x; x < a.x + a.w; ++x) h.at(x, y) += share;
    }
  }
  return h;
}

DescriptorSet ProjectedDescriptors(const Image& img, const FvModels& models) {
  return PcaApply(models.pca, ExtractDense(img, models.patch, models.stride));
}

Explanation ExplainDescriptors(const DescriptorSet& projected, int width, int height,
                               const FvModels& models, int class_index,
                               const R2Options& opts) {
  Explanation e;
  e.descriptors = projected;
  e.raw_fv = Aggregate(models.gmm, e.descriptors);
  e.improved_fv = Improve(e.raw_fv);
  e.r3 = RelevanceR3(models.svm, e.improved_fv, class_index);
  e.score = e.r3.score;
  const MappingMatrixView view(models.gmm, e.descriptors);
  e.r2 = RelevanceR2(e.r3, view, opts);
  e.heatmap = RelevanceR1(e.r2, e.descriptors, width, height);
  return e;
}

Explanation Explain(const Image& img, const FvModels& models, int class_index,
                    const R2Options& opts) {
  return ExplainDescriptors(ProjectedDescriptors(img, models), img.width, img.height,
                            models, class_index, opts);
}

}  // namespace fvlrp
