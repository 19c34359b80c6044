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


#include "fvlrp/imaging_io.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fvlrp/binary_io.h"
#include "fvlrp/errors.h"

namespace fvlrp {

Image::Image(int w, int h, int c, double fill)
    : width(w), height(h), channels(c),
      pixels(std::size_t(w) * std::size_t(h) * std::size_t(c), fill) {}

void Image::Validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("non-positive image size");
  if (channels != 1 && channels != 3) {
    throw ValidationError("channels must be 1 or 3");
  }
  if (pixels.size() != std::size_t(width) * height * channels) {
    throw ValidationError("pixel count does not match dimensions");
  }
  for (double v : pixels) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("intensity outside [0,1]");
  }
}

Image ToGray(const Image& img) {
  if (img.channels == 1) return img;
  Image gray(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (int c = 0; c < img.channels; ++c) s += img.at(x, y, c);
      gray.at(x, y) = s / img.channels;
    }
  }
  return gray;
}

void ValidateBox(const BoundingBox& box, int width, int height) {
  if (box.xmax < box.xmin || box.ymax < box.ymin) {
    throw ValidationError("inverted box '" + box.label + "'");
  }
  if (box.xmin < 0 || box.ymin < 0 || box.xmax >= width || box.ymax >= height) {
    throw ValidationError("box '" + box.label + "' outside image bounds");
  }
}

double Heatmap::Sum() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

double Heatmap::MaxAbs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileBytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// PNM

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

  void SkipSpaceAndComments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int ReadInt(const char* what) {
    SkipSpaceAndComments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      ++pos_;
    }
    int v = 0;
    const auto [ptr, ec] =
        std::from_chars(bytes_.data() + start, bytes_.data() + pos_, v);
    if (start == pos_ || ec != std::errc()) {
      throw ParseError(std::string("malformed PNM header field: ") + what);
    }
    (void)ptr;
    return v;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t RasterStart() {
    if (pos_ >= bytes_.size() ||
        !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw ParseError("missing whitespace after PNM header");
    }
    return pos_ + 1;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

Image DecodePnm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError("unsupported PNM magic (expected P5 or P6)");
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader header(bytes);
  const int width = header.ReadInt("width");
  const int height = header.ReadInt("height");
  const int maxval = header.ReadInt("maxval");
  if (width <= 0 || height <= 0) throw ParseError("non-positive PNM dimensions");
  if (maxval != 255 && maxval != 65535) {
    throw ParseError("unsupported maxval " + std::to_string(maxval));
  }
  const std::size_t start = header.RasterStart();
  const std::size_t bytes_per_sample = maxval == 255 ? 1 : 2;
  const std::size_t samples = std::size_t(width) * height * channels;
  if (bytes.size() < start + samples * bytes_per_sample) {
    throw ParseError("truncated PNM raster");
  }
  Image img(width, height, channels);
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + start);
  for (std::size_t i = 0; i < samples; ++i) {
    // 16-bit samples are big-endian per the netpbm format.
    const unsigned v = bytes_per_sample == 1
                           ? raw[i]
                           : (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1];
    img.pixels[i] = static_cast<double>(v) / maxval;
  }
  return img;
}

std::string EncodePnm(const Image& img, int maxval) {
  img.Validate();
  if (maxval != 255 && maxval != 65535) {
    throw ValidationError("maxval must be 255 or 65535");
  }
  std::string out = (img.channels == 1 ? "P5\n" : "P6\n") +
                    std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n" + std::to_string(maxval) + "\n";
  out.reserve(out.size() + img.pixels.size() * (maxval == 255 ? 1 : 2));
  for (double p : img.pixels) {
    const auto v = static_cast<unsigned>(std::lround(p * maxval));
    if (maxval == 255) {
      out.push_back(static_cast<char>(v));
    } else {
      out.push_back(static_cast<char>(v >> 8));
      out.push_back(static_cast<char>(v & 0xff));
    }
  }
  return out;
}

Image LoadImage(const std::filesystem::path& path) {
  return DecodePnm(ReadFileBytes(path));
}

void SaveImage(const Image& img, const std::filesystem::path& path, int maxval) {
  WriteFileBytes(path, EncodePnm(img, maxval));
}

// ---------------------------------------------------------------------------
// Heatmaps

Image RenderHeatmap(const Heatmap& h) {
  Image img(h.width, h.height, 3, 1.0);
  const double scale = h.MaxAbs();
  if (scale == 0.0) return img;
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      const double t = std::min(1.0, std::abs(h.at(x, y)) / scale);
      if (h.at(x, y) > 0.0) {
        img.at(x, y, 1) = 1.0 - t;
        img.at(x, y, 2) = 1.0 - t;
      } else if (h.at(x, y) < 0.0) {
        img.at(x, y, 0) = 1.0 - t;
        img.at(x, y, 1) = 1.0 - t;
      }
    }
  }
  return img;
}

void SaveHeatmap(const Heatmap& h, const std::filesystem::path& path,
                 HeatmapMode mode) {
  for (double v : h.values) {
    if (!std::isfinite(v)) throw ValidationError("heatmap has non-finite values");
  }
  if (mode == HeatmapMode::kRendered) {
    SaveImage(RenderHeatmap(h), path);
    return;
  }
  std::ostringstream out;
  binary::WriteMagic(out, "HMAP1");
  binary::WriteU32(out, static_cast<std::uint32_t>(h.width));
  binary::WriteU32(out, static_cast<std::uint32_t>(h.height));
  for (double v : h.values) binary::WriteF64(out, v);
  WriteFileBytes(path, out.str());
}

Heatmap LoadHeatmapRaw(const std::filesystem::path& path) {
  std::istringstream in(ReadFileBytes(path));
  binary::ExpectMagic(in, "HMAP1");
  const auto w = binary::ReadU32(in);
  const auto h = binary::ReadU32(in);
  Heatmap map(static_cast<int>(w), static_cast<int>(h));
  for (double& v : map.values) v = binary::ReadF64(in);
  return map;
}

// ---------------------------------------------------------------------------
// Annotations

namespace {

int ParseCoordinate(const std::string& token, int line_no) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": non-integer coordinate '" + token + "'");
  }
  return v;
}

}  // namespace

std::vector<BoundingBox> ParseAnnotations(const std::string& text) {
  std::vector<BoundingBox> boxes;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string t; fields >> t;) tokens.push_back(t);
    if (tokens.empty()) continue;
    if (tokens.size() != 5) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 'label xmin ymin xmax ymax'");
    }
    BoundingBox box;
    box.label = tokens[0];
    box.xmin = ParseCoordinate(tokens[1], line_no);
    box.ymin = ParseCoordinate(tokens[2], line_no);
    box.xmax = ParseCoordinate(tokens[3], line_no);
    box.ymax = ParseCoordinate(tokens[4], line_no);
    if (box.xmin < 0 || box.ymin < 0) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": negative coordinate");
    }
    if (box.xmax < box.xmin || box.ymax < box.ymin) {
      throw ValidationError("line " + std::to_string(line_no) + ": inverted box");
    }
    boxes.push_back(std::move(box));
  }
  return boxes;
}

std::vector<BoundingBox> LoadAnnotations(const std::filesystem::path& path) {
  return ParseAnnotations(ReadFileBytes(path));
}

void SaveAnnotations(const std::vector<BoundingBox>& boxes,
                     const std::filesystem::path& path) {
  std::string text;
  for (const auto& b : boxes) {
    text += b.label + " " + std::to_string(b.xmin) + " " + std::to_string(b.ymin) +
            " " + std::to_string(b.xmax) + " " + std::to_string(b.ymax) + "\n";
  }
  WriteFileBytes(path, text);
}

}  // namespace fvlrp
