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


#include "fvlrp/fisher.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "fvlrp/binary_io.h"
#include "fvlrp/errors.h"

namespace fvlrp {

int EmbeddingIndex::ToDim(const FvCoordinate& c) const {
  switch (c.moment) {
    case Moment::kWeight:
      return c.component;
    case Moment::kMean:
      return K_ + D_ * c.component + c.coordinate;
    case Moment::kSigma:
      return (1 + D_) * K_ + D_ * c.component + c.coordinate;
  }
  return -1;
}

FvCoordinate EmbeddingIndex::FromDim(int d) const {
  if (d < 0 || d >= size()) throw RangeError("FV dimension out of range");
  if (d < K_) return {Moment::kWeight, d, 0};
  if (d < (1 + D_) * K_) {
    const int off = d - K_;
    return {Moment::kMean, off / D_, off % D_};
  }
  const int off = d - (1 + D_) * K_;
  return {Moment::kSigma, off / D_, off % D_};
}

void EmbedDescriptorInto(const GmmModel& m, std::span<const double> l,
                         std::span<double> gamma, std::span<double> out) {
  if (static_cast<int>(out.size()) != FvLength(m)) {
    throw DimError("embedding span must have (1+2D)K entries");
  }
  Responsibilities(m, l, gamma);
  const int K = m.num_components;
  const int D = m.dim;
  double* weight_block = out.data();
  double* mean_block = out.data() + K;
  double* sigma_block = out.data() + std::size_t(1 + D) * K;
  for (int k = 0; k < K; ++k) {
    const double sqrt_pi = std::sqrt(m.weights[k]);
    weight_block[k] = (gamma[k] - m.weights[k]) / sqrt_pi;
    const auto mu = m.Mean(k);
    const auto sigma = m.Sigma(k);
    for (int r = 0; r < D; ++r) {
      const double z = (l[r] - mu[r]) / sigma[r];
      mean_block[std::size_t(k) * D + r] = gamma[k] * z / sqrt_pi;
      sigma_block[std::size_t(k) * D + r] =
          gamma[k] * (z * z - 1.0) / (std::numbers::sqrt2 * sqrt_pi);
    }
  }
}

std::vector<double> EmbedDescriptor(const GmmModel& m, std::span<const double> l) {
  std::vector<double> gamma(m.num_components);
  std::vector<double> out(FvLength(m));
  EmbedDescriptorInto(m, l, gamma, out);
  return out;
}

std::vector<double> Aggregate(const GmmModel& m, const DescriptorSet& ds) {
  if (ds.empty()) throw EmptyInputError("cannot aggregate an empty descriptor set");
  const int len = FvLength(m);
  std::vector<double> x(len, 0.0);
  std::vector<double> gamma(m.num_components);
  std::vector<double> psi(len);
  for (const auto& d : ds.descriptors) {
    EmbedDescriptorInto(m, d.values, gamma, psi);
    for (int i = 0; i < len; ++i) x[i] += psi[i];
  }
  const double n = static_cast<double>(ds.size());
  for (double& v : x) v /= n;
  return x;
}

std::vector<double> Improve(std::span<const double> x) {
  std::vector<double> out(x.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = std::sqrt(std::abs(x[i]));
    out[i] = x[i] >= 0.0 ? r : -r;
    ss += out[i] * out[i];
  }
  if (ss == 0.0) return out;
  const double norm = std::sqrt(ss);
  for (double& v : out) v /= norm;
  return out;
}

HellingerCheck CheckHellinger(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimError("Fisher vectors differ in length");
  double l1x = 0.0;
  double l1y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    l1x += std::abs(x[i]);
    l1y += std::abs(y[i]);
  }
  if (l1x == 0.0 || l1y == 0.0) {
    throw DegenerateInputError("Hellinger check needs nonzero vectors");
  }
  HellingerCheck out;
  const auto px = Improve(x);
  const auto py = Improve(y);
  for (std::size_t i = 0; i < x.size(); ++i) out.lhs += px[i] * py[i];
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double sign = x[i] * y[i] >= 0.0 ? 1.0 : -1.0;
    out.rhs += sign * std::sqrt(std::abs(x[i]) / l1x * (std::abs(y[i]) / l1y));
  }
  return out;
}

void SaveFisherVector(std::span<const double> x, int num_components, int dim,
                      const std::filesystem::path& path) {
  if (static_cast<int>(x.size()) != (1 + 2 * dim) * num_components) {
    throw DimError("FV length does not match (1+2D)K");
  }
  std::ostringstream out;
  binary::WriteMagic(out, "FVEC1");
  binary::WriteU32(out, static_cast<std::uint32_t>(num_components));
  binary::WriteU32(out, static_cast<std::uint32_t>(dim));
  for (double v : x) binary::WriteF64(out, v);
  WriteFileBytes(path, out.str());
}

StoredFisherVector LoadFisherVector(const std::filesystem::path& path) {
  std::istringstream in(ReadFileBytes(path));
  binary::ExpectMagic(in, "FVEC1");
  StoredFisherVector fv;
  fv.num_components = static_cast<int>(binary::ReadU32(in));
  fv.dim = static_cast<int>(binary::ReadU32(in));
  fv.values.resize(std::size_t(1 + 2 * fv.dim) * fv.num_components);
  for (double& v : fv.values) v = binary::ReadF64(in);
  return fv;
}

}  // namespace fvlrp
