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


#include "fvlrp/descriptors.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fvlrp/binary_io.h"
#include "fvlrp/errors.h"
#include "fvlrp/parallel.h"

namespace fvlrp {
namespace {

constexpr double kClamp = 0.2;

void NormalizeL2(std::vector<double>& v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  if (ss == 0.0) return;
  const double inv = 1.0 / std::sqrt(ss);
  for (double& x : v) x *= inv;
}

struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<double> magnitude;
  std::vector<double> bin_position;  // orientation in units of bins, [0, 8)
};

GradientField ComputeGradients(const Image& gray) {
  GradientField g;
  g.width = gray.width;
  g.height = gray.height;
  g.magnitude.resize(gray.pixels.size());
  g.bin_position.resize(gray.pixels.size());
  const double bins_per_radian = kOrientationBins / (2.0 * std::numbers::pi);
  for (int y = 0; y < gray.height; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, gray.height - 1);
    for (int x = 0; x < gray.width; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, gray.width - 1);
      const double gx = 0.5 * (gray.at(xp, y) - gray.at(xm, y));
      const double gy = 0.5 * (gray.at(x, yp) - gray.at(x, ym));
      const std::size_t i = std::size_t(y) * gray.width + x;
      g.magnitude[i] = std::hypot(gx, gy);
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += 2.0 * std::numbers::pi;
      double pos = theta * bins_per_radian;
      if (pos >= kOrientationBins) pos -= kOrientationBins;
      g.bin_position[i] = pos;
    }
  }
  return g;
}

std::vector<double> DescribePatch(const GradientField& g, int x0, int y0, int patch) {
  std::vector<double> hist(kRawDescriptorDim, 0.0);
  for (int py = 0; py < patch; ++py) {
    const int cy = py * kSpatialCells / patch;
    for (int px = 0; px < patch; ++px) {
      const int cx = px * kSpatialCells / patch;
      const std::size_t i = std::size_t(y0 + py) * g.width + (x0 + px);
      const double mag = g.magnitude[i];
      if (mag == 0.0) continue;
      const double pos = g.bin_position[i];
      const int lo = static_cast<int>(pos) % kOrientationBins;
      const int hi = (lo + 1) % kOrientationBins;
      const double frac = pos - std::floor(pos);
      double* cell = hist.data() + (cy * kSpatialCells + cx) * kOrientationBins;
      cell[lo] += (1.0 - frac) * mag;
      cell[hi] += frac * mag;
    }
  }
  NormalizeL2(hist);
  for (double& v : hist) v = std::min(v, kClamp);
  NormalizeL2(hist);
  return hist;
}

}  // namespace

Area ClipArea(const Area& a, int width, int height) {
  const int x0 = std::clamp(a.x, 0, width);
  const int y0 = std::clamp(a.y, 0, height);
  const int x1 = std::clamp(a.x + a.w, 0, width);
  const int y1 = std::clamp(a.y + a.h, 0, height);
  return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

DescriptorSet ExtractDense(const Image& img, int patch, int stride) {
  if (patch < kSpatialCells) {
    throw ExtractError("patch must be at least " + std::to_string(kSpatialCells));
  }
  if (stride < 1) throw ExtractError("stride must be >= 1");
  if (patch > img.width || patch > img.height) {
    throw ExtractError("patch larger than image");
  }
  const Image gray = ToGray(img);
  const GradientField grad = ComputeGradients(gray);
  const int nx = (img.width - patch) / stride + 1;
  const int ny = (img.height - patch) / stride + 1;

  DescriptorSet ds;
  ds.image_width = img.width;
  ds.image_height = img.height;
  ds.descriptors.resize(std::size_t(nx) * ny);
  ParallelFor(ds.descriptors.size(), [&](std::size_t i) {
    const int gx = static_cast<int>(i % nx);
    const int gy = static_cast<int>(i / nx);
    const int x0 = gx * stride;
    const int y0 = gy * stride;
    ds.descriptors[i].values = DescribePatch(grad, x0, y0, patch);
    ds.descriptors[i].area = {x0, y0, patch, patch};
  });
  return ds;
}

PcaModel PcaFit(std::span<const std::vector<double>> samples, int dim, bool whiten) {
  if (samples.empty()) throw DimError("no samples");
  const int in_dim = static_cast<int>(samples[0].size());
  if (dim < 1 || dim > in_dim) {
    throw DimError("requested " + std::to_string(dim) + " components from " +
                   std::to_string(in_dim) + "-dimensional data");
  }
  if (samples.size() <= static_cast<std::size_t>(dim)) {
    throw DimError("need more samples than components");
  }
  const auto n = static_cast<double>(samples.size());

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(in_dim);
  for (const auto& s : samples) {
    if (static_cast<int>(s.size()) != in_dim) throw DimError("ragged samples");
    mean += Eigen::Map<const Eigen::VectorXd>(s.data(), in_dim);
  }
  mean /= n;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(in_dim, in_dim);
  Eigen::VectorXd centered(in_dim);
  for (const auto& s : samples) {
    centered = Eigen::Map<const Eigen::VectorXd>(s.data(), in_dim) - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= n;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw DimError("eigendecomposition failed");
  const Eigen::VectorXd& evals = eig.eigenvalues();  // ascending
  const double top = std::max(evals(in_dim - 1), 0.0);
  const double rank_tol = 1e-10 * std::max(top, 1e-300);
  int rank = 0;
  for (int i = 0; i < in_dim; ++i) {
    if (evals(i) > rank_tol) ++rank;
  }
  if (dim > rank) {
    throw DimError("covariance rank " + std::to_string(rank) + " below requested " +
                   std::to_string(dim));
  }

  PcaModel m;
  m.input_dim = in_dim;
  m.output_dim = dim;
  m.whiten = whiten;
  m.mean.assign(mean.data(), mean.data() + in_dim);
  m.basis.resize(std::size_t(dim) * in_dim);
  for (int r = 0; r < dim; ++r) {
    const int col = in_dim - 1 - r;
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    std::copy(v.data(), v.data() + in_dim, m.basis.begin() + std::size_t(r) * in_dim);
    m.eigenvalues.push_back(evals(col));
  }
  return m;
}

PcaModel PcaFit(const std::vector<DescriptorSet>& sets, int dim, bool whiten) {
  std::vector<std::vector<double>> samples;
  for (const auto& ds : sets) {
    for (const auto& d : ds.descriptors) samples.push_back(d.values);
  }
  return PcaFit(std::span<const std::vector<double>>(samples), dim, whiten);
}

std::vector<double> PcaProject(const PcaModel& m, std::span<const double> v) {
  if (static_cast<int>(v.size()) != m.input_dim) {
    throw DimError("descriptor dim " + std::to_string(v.size()) +
                   " != PCA input dim " + std::to_string(m.input_dim));
  }
  std::vector<double> centered(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) centered[i] = v[i] - m.mean[i];
  std::vector<double> out(m.output_dim);
  for (int r = 0; r < m.output_dim; ++r) {
    const auto row = m.Row(r);
    double s = 0.0;
    for (int i = 0; i < m.input_dim; ++i) s += row[i] * centered[i];
    if (m.whiten) s /= std::sqrt(m.eigenvalues[r]);
    out[r] = s;
  }
  return out;
}

DescriptorSet PcaApply(const PcaModel& m, const DescriptorSet& ds) {
  DescriptorSet out;
  out.image_width = ds.image_width;
  out.image_height = ds.image_height;
  out.descriptors.resize(ds.size());
  ParallelFor(ds.size(), [&](std::size_t i) {
    out.descriptors[i].values = PcaProject(m, ds.descriptors[i].values);
    out.descriptors[i].area = ds.descriptors[i].area;
  });
  return out;
}

void SaveDescriptorSet(const DescriptorSet& ds, const std::filesystem::path& path) {
  std::ostringstream out;
  binary::WriteMagic(out, "DESC1");
  binary::WriteU32(out, static_cast<std::uint32_t>(ds.dim()));
  binary::WriteU32(out, static_cast<std::uint32_t>(ds.size()));
  binary::WriteU32(out, static_cast<std::uint32_t>(ds.image_width));
  binary::WriteU32(out, static_cast<std::uint32_t>(ds.image_height));
  for (const auto& d : ds.descriptors) {
    binary::WriteU32(out, static_cast<std::uint32_t>(d.area.x));
    binary::WriteU32(out, static_cast<std::uint32_t>(d.area.y));
    binary::WriteU32(out, static_cast<std::uint32_t>(d.area.w));
    binary::WriteU32(out, static_cast<std::uint32_t>(d.area.h));
    for (double v : d.values) binary::WriteF64(out, v);
  }
  WriteFileBytes(path, out.str());
}

DescriptorSet LoadDescriptorSet(const std::filesystem::path& path) {
  std::istringstream in(ReadFileBytes(path));
  binary::ExpectMagic(in, "DESC1");
  const auto dim = binary::ReadU32(in);
  const auto count = binary::ReadU32(in);
  DescriptorSet ds;
  ds.image_width = static_cast<int>(binary::ReadU32(in));
  ds.image_height = static_cast<int>(binary::ReadU32(in));
  ds.descriptors.resize(count);
  for (auto& d : ds.descriptors) {
    d.area.x = static_cast<int>(binary::ReadU32(in));
    d.area.y = static_cast<int>(binary::ReadU32(in));
    d.area.w = static_cast<int>(binary::ReadU32(in));
    d.area.h = static_cast<int>(binary::ReadU32(in));
    d.values.resize(dim);
    for (double& v : d.values) v = binary::ReadF64(in);
  }
  return ds;
}

}  // namespace fvlrp
