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


#include "fvlrp/synthgen.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fvlrp/errors.h"
#include "fvlrp/parallel.h"
#include "fvlrp/rng.h"

namespace fvlrp {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kNoiseWaves = 6;
constexpr std::uint64_t kTestStreamOffset = 1u << 30;

// Per-image instantiation of a texture: random phases (and, for noise,
// random wave directions and frequencies).
struct TextureInstance {
  std::vector<double> kx, ky, phase;
  double amplitude = 0.0;
  double mean = 0.5;

  double operator()(int x, int y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < kx.size(); ++i) {
      s += std::sin(kx[i] * x + ky[i] * y + phase[i]);
    }
    return mean + amplitude * s;
  }
};

TextureInstance Instantiate(const TextureParams& t, Rng& rng) {
  TextureInstance inst;
  inst.mean = t.mean;
  if (t.kind == TextureKind::kGrating) {
    const double k = kTwoPi * t.frequency;
    inst.kx.push_back(k * std::cos(t.orientation));
    inst.ky.push_back(k * std::sin(t.orientation));
    inst.phase.push_back(kTwoPi * rng.Uniform());
    inst.amplitude = 0.5 * t.contrast;
  } else {
    for (int i = 0; i < kNoiseWaves; ++i) {
      const double theta = std::numbers::pi * rng.Uniform();
      const double k = kTwoPi * t.frequency * (0.8 + 0.4 * rng.Uniform());
      inst.kx.push_back(k * std::cos(theta));
      inst.ky.push_back(k * std::sin(theta));
      inst.phase.push_back(kTwoPi * rng.Uniform());
    }
    // Keeps the RMS of the sum equal to that of a single grating.
    inst.amplitude = 0.5 * t.contrast / std::sqrt(kNoiseWaves);
  }
  return inst;
}

bool InShape(ObjectShape shape, int x, int y, int x0, int y0, int w, int h) {
  if (x < x0 || y < y0 || x >= x0 + w || y >= y0 + h) return false;
  const double cx = x0 + (w - 1) / 2.0;
  const double cy = y0 + (h - 1) / 2.0;
  const double dx = (x - cx) / (w / 2.0);
  const double dy = (y - cy) / (h / 2.0);
  switch (shape) {
    case ObjectShape::kRectangle:
      return true;
    case ObjectShape::kDisc:
      return dx * dx + dy * dy <= 1.0;
    case ObjectShape::kDiamond:
      return std::abs(dx) + std::abs(dy) <= 1.0;
  }
  return false;
}

double Quantize(double v) {
  return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

}  // namespace

void CorpusSpec::Validate() const {
  if (width <= 0 || height <= 0) throw SpecError("image size must be positive");
  if (classes.empty()) throw SpecError("at least one class required");
  if (!(context_correlation >= 0.0 && context_correlation <= 1.0)) {
    throw SpecError("context_correlation must lie in [0,1]");
  }
  if (train_count < 1 || test_count < 1) throw SpecError("counts must be >= 1");
  if (object_min < 1 || object_max < object_min) {
    throw SpecError("invalid object size range");
  }
  if (object_max > width || object_max > height) {
    throw SpecError("object larger than image");
  }
  for (std::size_t a = 0; a < classes.size(); ++a) {
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      if (classes[a].name == classes[b].name) {
        throw SpecError("duplicate class name '" + classes[a].name + "'");
      }
      if (classes[a].object == classes[b].object ||
          classes[a].background == classes[b].background) {
        throw SpecError("textures must be distinct across classes");
      }
    }
  }
  if (shared_backgrounds.empty() && classes.size() < 2 &&
      context_correlation < 1.0) {
    throw SpecError("no background available for non-matching draws");
  }
}

CorpusSpec DefaultCorpusSpec(int num_classes, double context_correlation,
                             std::uint64_t seed) {
  if (num_classes < 1) throw SpecError("num_classes must be >= 1");
  CorpusSpec spec;
  spec.context_correlation = context_correlation;
  spec.seed = seed;
  const double pi = std::numbers::pi;
  const ObjectShape shapes[] = {ObjectShape::kDisc, ObjectShape::kRectangle,
                                ObjectShape::kDiamond};
  for (int c = 0; c < num_classes; ++c) {
    ClassAppearance cls;
    cls.name = "class" + std::to_string(c);
    cls.shape = shapes[c % 3];
    cls.object.kind = TextureKind::kGrating;
    cls.object.orientation = (c + 0.5) * pi / num_classes;
    cls.object.frequency = 0.2;
    cls.object.contrast = 0.4;
    cls.object.mean =
        num_classes == 1 ? 0.75 : 0.25 + 0.5 * c / (num_classes - 1);
    cls.background.kind = TextureKind::kGrating;
    cls.background.orientation = c * pi / num_classes;
    cls.background.frequency = 0.3;
    cls.background.contrast = 0.2;
    cls.background.mean = 0.5;
    spec.classes.push_back(cls);
  }
  const int shared = std::max(2, num_classes);
  for (int s = 0; s < shared; ++s) {
    TextureParams t;
    t.kind = TextureKind::kNoise;
    t.frequency = 0.12 + 0.2 * s / shared;
    t.contrast = 0.2;
    t.mean = 0.5;
    spec.shared_backgrounds.push_back(t);
  }
  return spec;
}

LabeledImage GenerateImage(const CorpusSpec& spec, std::uint64_t image_seed,
                           int class_index) {
  const int num_classes = static_cast<int>(spec.classes.size());
  if (class_index < 0 || class_index >= num_classes) {
    throw SpecError("class index out of range");
  }
  Rng rng(image_seed);
  const ClassAppearance& cls = spec.classes[class_index];

  LabeledImage out;
  // Background choice.
  const TextureParams* bg = nullptr;
  if (rng.Uniform() < spec.context_correlation) {
    out.background_id = class_index;
    bg = &cls.background;
  } else if (!spec.shared_backgrounds.empty()) {
    const auto s = rng.Index(spec.shared_backgrounds.size());
    out.background_id = num_classes + static_cast<int>(s);
    bg = &spec.shared_backgrounds[s];
  } else {
    auto other = static_cast<int>(rng.Index(num_classes - 1));
    if (other >= class_index) ++other;
    out.background_id = other;
    bg = &spec.classes[other].background;
  }
  const TextureInstance bg_tex = Instantiate(*bg, rng);
  const TextureInstance obj_tex = Instantiate(cls.object, rng);

  // Object placement.
  const int span = spec.object_max - spec.object_min + 1;
  const int w = spec.object_min + static_cast<int>(rng.Index(span));
  const int h = spec.object_min + static_cast<int>(rng.Index(span));
  const int x0 = static_cast<int>(rng.Index(spec.width - w + 1));
  const int y0 = static_cast<int>(rng.Index(spec.height - h + 1));

  BoundingBox box{cls.name, spec.width, spec.height, -1, -1};
  out.image = Image(spec.width, spec.height, 1);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double v;
      if (InShape(cls.shape, x, y, x0, y0, w, h)) {
        v = obj_tex(x, y);
        box.xmin = std::min(box.xmin, x);
        box.ymin = std::min(box.ymin, y);
        box.xmax = std::max(box.xmax, x);
        box.ymax = std::max(box.ymax, y);
      } else {
        v = bg_tex(x, y);
      }
      v += spec.pixel_noise * (2.0 * rng.Uniform() - 1.0);
      out.image.at(x, y) = Quantize(v);
    }
  }
  out.labels.push_back(cls.name);
  out.boxes.push_back(box);
  return out;
}

Corpus GenerateCorpus(const CorpusSpec& spec) {
  spec.Validate();
  const auto num_classes = static_cast<int>(spec.classes.size());
  Corpus corpus;
  corpus.train.resize(spec.train_count);
  corpus.test.resize(spec.test_count);
  ParallelFor(corpus.train.size(), [&](std::size_t i) {
    corpus.train[i] = GenerateImage(spec, MixSeed(spec.seed, i),
                                    static_cast<int>(i) % num_classes);
  });
  ParallelFor(corpus.test.size(), [&](std::size_t i) {
    corpus.test[i] = GenerateImage(spec, MixSeed(spec.seed, kTestStreamOffset + i),
                                   static_cast<int>(i) % num_classes);
  });
  return corpus;
}

LabeledImage InjectArtefact(const LabeledImage& img, const std::string& class_filter) {
  if (std::find(img.labels.begin(), img.labels.end(), class_filter) ==
      img.labels.end()) {
    return img;
  }
  const int w = img.image.width;
  const int h = img.image.height;
  if (w < kArtefactSize || h < kArtefactSize) {
    throw SpecError("tag patch does not fit in the image");
  }
  LabeledImage out = img;
  if (img.artefact) return out;  // already stamped

  const int s = kArtefactSize;
  const BoundingBox corners[] = {
      {"artefact", 0, h - s, s - 1, h - 1},          // bottom-left
      {"artefact", w - s, h - s, w - 1, h - 1},      // bottom-right
      {"artefact", 0, 0, s - 1, s - 1},              // top-left
      {"artefact", w - s, 0, w - 1, s - 1},          // top-right
  };
  auto overlaps = [&](const BoundingBox& a) {
    for (const auto& b : img.boxes) {
      if (a.xmin <= b.xmax && b.xmin <= a.xmax && a.ymin <= b.ymax &&
          b.ymin <= a.ymax) {
        return true;
      }
    }
    return false;
  };
  BoundingBox where = corners[0];
  out.artefact_fallback = true;
  for (const auto& c : corners) {
    if (!overlaps(c)) {
      where = c;
      out.artefact_fallback = false;
      break;
    }
  }
  for (int y = where.ymin; y <= where.ymax; ++y) {
    for (int x = where.xmin; x <= where.xmax; ++x) {
      const bool on = (((x - where.xmin) / 2) + ((y - where.ymin) / 2)) % 2 == 0;
      for (int c = 0; c < out.image.channels; ++c) {
        out.image.at(x, y, c) = on ? 1.0 : 0.0;
      }
    }
  }
  out.artefact = where;
  return out;
}

}  // namespace fvlrp
