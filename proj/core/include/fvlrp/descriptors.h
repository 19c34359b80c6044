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

#include <filesystem>
#include <span>
#include <vector>

#include "fvlrp/imaging_io.h"

namespace fvlrp {

// Pixel rectangle [x, x + w) x [y, y + h).
struct Area {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool operator==(const Area&) const = default;
};

// Clips an area to [0, width) x [0, height); the result may be empty.
Area ClipArea(const Area& a, int width, int height);

struct LocalDescriptor {
  std::vector<double> values;
  Area area;  // receptive field

  bool operator==(const LocalDescriptor&) const = default;
};

struct DescriptorSet {
  int image_width = 0;
  int image_height = 0;
  std::vector<LocalDescriptor> descriptors;  // row-major grid order

  std::size_t size() const { return descriptors.size(); }
  bool empty() const { return descriptors.empty(); }
  int dim() const {
    return descriptors.empty() ? 0 : static_cast<int>(descriptors[0].values.size());
  }
  bool operator==(const DescriptorSet&) const = default;
};

inline constexpr int kSpatialCells = 4;
inline constexpr int kOrientationBins = 8;
inline constexpr int kRawDescriptorDim = kSpatialCells * kSpatialCells * kOrientationBins;

// Dense gradient-orientation histograms, one per grid position (x, y) with
// x, y multiples of `stride` and the patch inside the image. Each patch is
// split into 4x4 cells; every pixel votes its gradient magnitude into the
// two nearest of 8 orientation bins of its cell (linear interpolation in
// angle). The 128-vector is l2-normalized, clamped at 0.2 and
// re-normalized. Gradients are central differences with replicated borders
// on the grayscale image. Throws ExtractError if the patch does not fit.
DescriptorSet ExtractDense(const Image& img, int patch, int stride);

// Principal component projection.
struct PcaModel {
  std::vector<double> mean;       // input dimension
  std::vector<double> basis;      // output_dim rows of input_dim, row-major
  std::vector<double> eigenvalues;  // descending, one per basis row
  bool whiten = false;  // divide each coordinate by sqrt(eigenvalue)
  int input_dim = 0;
  int output_dim = 0;

  std::span<const double> Row(int r) const {
    return {basis.data() + std::size_t(r) * input_dim, std::size_t(input_dim)};
  }
  bool operator==(const PcaModel&) const = default;
};

// Top-`dim` eigenvectors of the sample covariance, eigenvalue-descending,
// each signed so its largest-magnitude entry is positive. Throws DimError if
// dim exceeds the input dimension or the covariance rank, or if there are
// not more samples than dim.
PcaModel PcaFit(std::span<const std::vector<double>> samples, int dim,
                bool whiten = false);
PcaModel PcaFit(const std::vector<DescriptorSet>& sets, int dim, bool whiten = false);

std::vector<double> PcaProject(const PcaModel& m, std::span<const double> v);

// Projects every descriptor, keeping order and receptive fields.
DescriptorSet PcaApply(const PcaModel& m, const DescriptorSet& ds);

// DESC1 cache: "DESC1", u32 dim, u32 count, u32 image width, u32 image
// height, then per descriptor u32 x, y, w, h and dim f64 values.
void SaveDescriptorSet(const DescriptorSet& ds, const std::filesystem::path& path);
DescriptorSet LoadDescriptorSet(const std::filesystem::path& path);

}  // namespace fvlrp
