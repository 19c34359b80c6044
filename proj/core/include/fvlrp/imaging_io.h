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
#include <string>
#include <vector>

namespace fvlrp {

// Row-major image with intensities in [0, 1]. channels is 1 or 3; color
// pixels are interleaved (r, g, b).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> pixels;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0);

  double& at(int x, int y, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  // Throws ValidationError when the invariants (sizes, [0,1]) are broken.
  void Validate() const;

  bool operator==(const Image&) const = default;
};

// Single-channel view; color images are averaged over channels.
Image ToGray(const Image& img);

// Inclusive pixel rectangle with a class label.
struct BoundingBox {
  std::string label;
  int xmin = 0;
  int ymin = 0;
  int xmax = 0;
  int ymax = 0;

  int Width() const { return xmax - xmin + 1; }
  int Height() const { return ymax - ymin + 1; }
  bool Contains(int x, int y) const {
    return x >= xmin && x <= xmax && y >= ymin && y <= ymax;
  }
  bool operator==(const BoundingBox&) const = default;
};

// Throws ValidationError unless 0 <= min <= max < extent on both axes.
void ValidateBox(const BoundingBox& box, int width, int height);

// One signed relevance value per pixel, row-major.
struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Heatmap() = default;
  Heatmap(int w, int h) : width(w), height(h), values(std::size_t(w) * h, 0.0) {}

  double& at(int x, int y) { return values[std::size_t(y) * width + x]; }
  double at(int x, int y) const { return values[std::size_t(y) * width + x]; }
  double Sum() const;
  double MaxAbs() const;

  bool operator==(const Heatmap&) const = default;
};

// --- Portable pixmaps (P5 grayscale / P6 color), maxval 255 or 65535. ----

Image DecodePnm(const std::string& bytes);
std::string EncodePnm(const Image& img, int maxval = 255);
Image LoadImage(const std::filesystem::path& path);
void SaveImage(const Image& img, const std::filesystem::path& path,
               int maxval = 255);

// --- Heatmaps ------------------------------------------------------------

enum class HeatmapMode { kRaw, kRendered };

// Blue-white-red diverging map centered at zero, scaled by max|R|. Positive
// values ramp white -> red (1, 1-t, 1-t), negative white -> blue
// (1-t, 1-t, 1) with t = |R| / max|R|. An all-zero map is all white.
Image RenderHeatmap(const Heatmap& h);

// kRaw writes "HMAP1", u32 width, u32 height, then width*height f64 values
// (all little-endian). kRendered writes a P6 of RenderHeatmap.
void SaveHeatmap(const Heatmap& h, const std::filesystem::path& path,
                 HeatmapMode mode);
Heatmap LoadHeatmapRaw(const std::filesystem::path& path);

// --- Annotations: one "label xmin ymin xmax ymax" per line. ----------------

std::vector<BoundingBox> ParseAnnotations(const std::string& text);
std::vector<BoundingBox> LoadAnnotations(const std::filesystem::path& path);
void SaveAnnotations(const std::vector<BoundingBox>& boxes,
                     const std::filesystem::path& path);

// Whole-file helpers shared by the loaders. Both throw IoError.
std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace fvlrp
