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
#include <span>
#include <string>
#include <vector>

#include "fvlrp/descriptors.h"
#include "fvlrp/gmm.h"
#include "fvlrp/imaging_io.h"
#include "fvlrp/lrp_fv.h"
#include "fvlrp/rng.h"
#include "fvlrp/svm.h"

namespace fvlrp {

// Descriptor indices by descending relevance, ties by ascending index.
std::vector<std::size_t> RelevanceOrdering(std::span<const double> r2);

enum class ReplacementMode {
  kGmmSample,  // draw l' from the GMM
  kIdentity,   // l' = l (test mode; the FV never changes)
};

struct MorfOptions {
  int batch = 5;
  int steps = 20;  // I
  ReplacementMode mode = ReplacementMode::kGmmSample;
};

struct MorfTrace {
  std::string ordering;
  double original = 0.0;       // f(x)
  std::vector<double> scores;  // f(x_MoRF^(i)), i = 1..I
  int batch = 0;
  std::vector<bool> positive;  // scores[i] > 0
};

// Final state of a MoRF run, for checking the incremental update.
struct MorfState {
  DescriptorSet mutated;
  std::vector<double> raw_fv;
};

// Replaces descriptors in `ordering` batch by batch, updating the raw FV as
// x += (Psi(l') - Psi(l)) / |L| and scoring the improved FV after each
// batch. Throws RangeError if batch * steps > |L| or the ordering is short.
MorfTrace MorfReplace(const DescriptorSet& ds, const GmmModel& gmm, const SvmModel& svm,
                      int class_index, std::span<const std::size_t> ordering,
                      const MorfOptions& opts, Rng& rng, MorfState* state = nullptr);

// Same with the ordering taken from an R2 map.
MorfTrace MorfReplace(const DescriptorSet& ds, const GmmModel& gmm, const SvmModel& svm,
                      int class_index, const R2Map& r2, const MorfOptions& opts,
                      Rng& rng, MorfState* state = nullptr);

// A = (1/I) sum_i (f(x) - f(x^(i))). Throws EmptyInputError on an empty trace.
double AreaAbove(const MorfTrace& trace);

struct QualityStats {
  double area = 0.0;  // mean A over traces
  double switch_fraction = 0.0;  // V
  // histogram[i]: traces whose score first drops below zero at step i + 1.
  std::vector<int> histogram;
};

// Throws ValidationError for a trace with f(x) <= 0, EmptyInputError for
// no traces.
QualityStats SignSwitchFraction(std::span<const MorfTrace> traces);

struct OrderingSpec {
  std::string name;
  bool random = false;
  R2Options r2;  // used when !random
};

struct MorfItem {
  std::string image_id;
  int class_index = 0;
  DescriptorSet descriptors;  // PCA space
};

struct CompareOptions {
  MorfOptions morf;
  int repetitions = 5;
  std::uint64_t seed = 1;
};

struct OrderingResult {
  std::string name;
  QualityStats stats;
  double mean_area = 0.0;
  // Standard error across images of the per-image mean A.
  double se_area = 0.0;
  std::vector<double> image_area;  // per image, averaged over repetitions
  std::vector<MorfTrace> traces;   // image-major, then repetition
};

struct MorfReport {
  std::vector<std::string> image_ids;  // images with f(x) > 0
  std::vector<OrderingResult> orderings;
};

// Runs every ordering on every item with f(x) > 0. Repetition r of image j
// draws its replacements from the same seed for every ordering; random
// orderings draw their permutation from a separate stream. Throws
// EmptyInputError if no item is predicted positive.
MorfReport CompareOrderings(std::span<const MorfItem> items, const GmmModel& gmm,
                            const SvmModel& svm, std::span<const OrderingSpec> orderings,
                            const CompareOptions& opts);

enum class ContextMode { kPositiveOnly, kAll };

std::string ContextModeName(ContextMode m);
ContextMode ParseContextMode(const std::string& name);  // positive | all

struct ContextRatio {
  double mu = 0.0;
  bool defined = false;
  double mean_in = 0.0;
  double mean_out = 0.0;
  std::size_t in_count = 0;
  std::size_t out_count = 0;
};

// mu = mean over pixels outside all boxes / mean over pixels inside any box.
// Undefined when the inside mean is <= 0 or the outside mean is < 0.
// Throws ValidationError without boxes and UndefinedError when the boxes
// cover the whole image.
ContextRatio ComputeContextRatio(const Heatmap& h, std::span<const BoundingBox> boxes,
                                 ContextMode mode = ContextMode::kPositiveOnly);

struct ContextEntry {
  std::string image_id;
  int class_index = 0;
  Heatmap heatmap;
  std::vector<BoundingBox> boxes;  // boxes of class_index only
};

struct ContextCell {
  bool missing = true;  // no entries for the class
  int used = 0;
  int undefined = 0;
  double mean_mu = 0.0;
};

struct ContextRow {
  std::string class_name;
  ContextCell fv;
  ContextCell nn;
};

// Per class mean mu for two sets of true-positive heatmaps. Entries whose
// mu is undefined are excluded and counted.
std::vector<ContextRow> ContextTable(const std::vector<std::string>& class_names,
                                     std::span<const ContextEntry> fv,
                                     std::span<const ContextEntry> nn,
                                     ContextMode mode = ContextMode::kPositiveOnly);

// Mean of the defined per-class means; NaN when none is defined.
double OverallMeanMu(std::span<const ContextRow> rows, bool fv_column);

}  // namespace fvlrp
