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

// Brute-force reference implementations used to cross-check the library.

#include <cmath>
#include <vector>

#include "fvlrp/fisher.h"
#include "fvlrp/lrp_fv.h"
#include "fvlrp/lrp_nn.h"

namespace fvlrp::testing {

// R2 from the fully materialized |L| x FV-length mapping matrix. Mirrors the
// summation order of the streaming code so results can be compared bitwise.
inline std::vector<double> MaterializedR2(const std::vector<double>& r3, const GmmModel& gmm,
                                          const DescriptorSet& ds, const R2Options& opts) {
  const std::size_t n = ds.size();
  const int len = FvLength(gmm);
  std::vector<std::vector<double>> m(n);
  for (std::size_t l = 0; l < n; ++l) m[l] = EmbedDescriptor(gmm, ds.descriptors[l].values);
  const bool absolute = opts.variant == R2Variant::kAbsolute;
  std::vector<double> col(len, 0.0);
  std::vector<bool> nz(len, false);
  for (std::size_t l = 0; l < n; ++l) {
    for (int d = 0; d < len; ++d) {
      if (m[l][d] != 0.0) nz[d] = true;
      col[d] += absolute ? std::abs(m[l][d]) : m[l][d];
    }
  }
  double zero_mass = 0.0;
  for (int d = 0; d < len; ++d) {
    if (!nz[d]) zero_mass += r3[d];
  }
  const double xi = zero_mass / static_cast<double>(n);
  std::vector<double> out(n);
  for (std::size_t l = 0; l < n; ++l) {
    double acc = 0.0;
    for (int d = 0; d < len; ++d) {
      if (!nz[d]) continue;
      double den = col[d];
      if (opts.variant == R2Variant::kEpsilon) den += opts.epsilon * (col[d] >= 0.0 ? 1.0 : -1.0);
      const double share = absolute ? std::abs(m[l][d]) : m[l][d];
      acc += r3[d] * share / den;
    }
    out[l] = acc + xi;
  }
  return out;
}

// Per layer z_ij = w_ji x_i with the bias as an extra column.
struct Contributions {
  std::vector<std::vector<double>> z;  // [j][i], i == in is the bias
};

inline std::vector<Contributions> MaterializeContributions(const NeuralNet& net,
                                                           const std::vector<double>& input) {
  std::vector<Contributions> out;
  std::vector<double> x = input;
  for (const DenseLayer& layer : net.layers) {
    Contributions c;
    std::vector<double> next(layer.out);
    for (int j = 0; j < layer.out; ++j) {
      std::vector<double> row(layer.in + 1, 0.0);
      double z = 0.0;
      for (int i = 0; i < layer.in; ++i) {
        row[i] = layer.W(j, i) * x[i];
        z += row[i];
      }
      row[layer.in] = layer.bias.empty() ? 0.0 : layer.bias[j];
      z += row[layer.in];
      c.z.push_back(std::move(row));
      next[j] = layer.activation == Activation::kRelu ? std::max(0.0, z) : z;
    }
    out.push_back(std::move(c));
    x = std::move(next);
  }
  return out;
}

// Input relevance by explicit per-layer redistribution matrices.
// rule: 0 = epsilon, 1 = alpha-beta.
inline std::vector<double> OracleRelevance(const NeuralNet& net, const std::vector<double>& input,
                                           int cls, int rule, double eps, double alpha,
                                           double beta) {
  const auto contrib = MaterializeContributions(net, input);
  const DenseLayer& top = net.layers.back();
  std::vector<double> r(top.out, 0.0);
  double f = 0.0;
  for (double v : contrib.back().z[cls]) f += v;
  r[cls] = f;
  for (int k = static_cast<int>(net.layers.size()) - 1; k >= 0; --k) {
    const DenseLayer& layer = net.layers[k];
    std::vector<std::vector<double>> rmat(layer.out, std::vector<double>(layer.in, 0.0));
    for (int j = 0; j < layer.out; ++j) {
      const auto& row = contrib[k].z[j];
      if (rule == 0) {
        double z = 0.0;
        for (double v : row) z += v;
        const double den = z + eps * (z >= 0.0 ? 1.0 : -1.0);
        for (int i = 0; i < layer.in; ++i) rmat[j][i] = r[j] == 0.0 ? 0.0 : row[i] / den * r[j];
      } else {
        double zp = 0.0, zn = 0.0;
        for (double v : row) (v > 0 ? zp : zn) += v;
        for (int i = 0; i < layer.in; ++i) {
          const double p = row[i] > 0 && zp != 0.0 ? row[i] / zp : 0.0;
          const double n = row[i] < 0 && zn != 0.0 ? row[i] / zn : 0.0;
          rmat[j][i] = (alpha * p - beta * n) * r[j];
        }
      }
    }
    std::vector<double> lower(layer.in, 0.0);
    for (int i = 0; i < layer.in; ++i) {
      for (int j = 0; j < layer.out; ++j) lower[i] += rmat[j][i];
    }
    r = std::move(lower);
  }
  return r;
}

}  // namespace fvlrp::testing
