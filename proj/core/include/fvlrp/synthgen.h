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
#include <optional>
#include <string>
#include <vector>

#include "fvlrp/imaging_io.h"

namespace fvlrp {

enum class TextureKind { kGrating, kNoise };

// Procedural texture. Gratings are mean + contrast/2 * sin(2*pi*f*(x cos t +
// y sin t) + phase); noise is a sum of random-orientation sinusoids with
// frequencies within +-20% of `frequency` (band-limited). Phase and noise
// components are drawn per image.
struct TextureParams {
  TextureKind kind = TextureKind::kGrating;
  double orientation = 0.0;  // radians
  double frequency = 0.25;   // cycles per pixel
  double contrast = 0.4;
  double mean = 0.5;

  bool operator==(const TextureParams&) const = default;
};

enum class ObjectShape { kRectangle, kDisc, kDiamond };

struct ClassAppearance {
  std::string name;
  ObjectShape shape = ObjectShape::kRectangle;
  TextureParams object;
  TextureParams background;  // the class-associated context texture
};

struct CorpusSpec {
  int width = 64;
  int height = 64;
  std::vector<ClassAppearance> classes;
  // Backgrounds not associated with any class. With probability
  // 1 - context_correlation an image's background comes from this pool, so
  // at context_correlation = 0 background and label are independent. When
  // the pool is empty the other classes' backgrounds are used instead.
  std::vector<TextureParams> shared_backgrounds;
  double context_correlation = 0.5;
  int object_min = 20;  // object side length range, pixels
  int object_max = 28;
  double pixel_noise = 0.01;  // uniform +-amplitude added to every pixel
  std::uint64_t seed = 1;
  int train_count = 200;
  int test_count = 40;

  // Throws SpecError.
  void Validate() const;
};

// Class c gets an object grating at orientation (c + 1/2) * pi / C with mean
// intensity spread over [0.25, 0.75], a low-contrast background grating at
// c * pi / C, and shapes cycling disc / rectangle / diamond. The shared pool
// holds max(2, C) band-limited noise textures.
CorpusSpec DefaultCorpusSpec(int num_classes, double context_correlation,
                             std::uint64_t seed);

struct LabeledImage {
  Image image;
  std::vector<std::string> labels;
  std::vector<BoundingBox> boxes;
  int background_id = 0;  // < C: class background, >= C: shared pool entry
  std::optional<BoundingBox> artefact;  // tag location once stamped
  bool artefact_fallback = false;       // tag had to overlap an object box
};

struct Corpus {
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> test;
};

// Deterministic in spec.seed. Image i of a split is rendered from its own
// child seed, and its class is i mod C (balanced splits).
Corpus GenerateCorpus(const CorpusSpec& spec);

LabeledImage GenerateImage(const CorpusSpec& spec, std::uint64_t image_seed,
                           int class_index);

inline constexpr int kArtefactSize = 8;

// Stamps an 8x8 checkerboard (2-pixel cells) into the first corner free of
// object boxes, trying bottom-left, bottom-right, top-left, top-right; when
// none is free it falls back to bottom-left and sets artefact_fallback.
// Images whose labels do not include class_filter are returned unchanged.
LabeledImage InjectArtefact(const LabeledImage& img, const std::string& class_filter);

}  // namespace fvlrp
