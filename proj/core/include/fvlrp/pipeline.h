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
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fvlrp/evaluation.h"
#include "fvlrp/lrp_fv.h"
#include "fvlrp/lrp_nn.h"
#include "fvlrp/synthgen.h"

namespace fvlrp {

enum class NnRule { kEpsilon, kAlphaBeta };

// Everything a pipeline run depends on. Loaded from a JSON file (see
// docs/formats.md); command-line flags override file values.
struct PipelineConfig {
  std::uint64_t seed = 1;
  std::filesystem::path work_dir = "fvlrp-work";

  // corpus
  int num_classes = 2;
  double context_correlation = 0.5;
  int image_width = 64;
  int image_height = 64;
  int train_count = 200;
  int test_count = 40;
  std::string artefact_class;  // empty: no tag injected

  // descriptors
  int patch = 16;
  int stride = 4;
  int pca_dim = 16;
  bool pca_whiten = false;

  // gmm
  int gmm_components = 8;
  int gmm_max_iterations = 100;
  double gmm_tolerance = 1e-6;

  // svm
  double svm_c = 1.0;
  int svm_epochs = 200;

  // nn
  std::vector<int> nn_hidden = {64, 32};
  int nn_downscale = 2;
  int nn_epochs = 50;
  double nn_learning_rate = 0.01;
  int nn_batch_size = 16;

  // lrp
  R2Variant variant = R2Variant::kEpsilon;
  double epsilon = 100.0;
  NnRule nn_rule = NnRule::kEpsilon;
  double nn_epsilon = 0.01;
  double alpha = 2.0;
  double beta = 1.0;
  ContextMode context_mode = ContextMode::kPositiveOnly;

  // morf
  int morf_batch = 5;
  int morf_steps = 20;
  int morf_repetitions = 5;

  // Throws ValidationError for out-of-range values.
  void Validate() const;
};

// Throws ParseError for malformed JSON or unknown keys.
PipelineConfig ParseConfig(const std::string& json_text);
PipelineConfig LoadConfig(const std::filesystem::path& path);
// Canonical JSON (sorted keys, no paths).
std::string ConfigToJson(const PipelineConfig& c);

enum class Stage {
  kSynthGen,
  kExtract,
  kPcaFit,
  kGmmFit,
  kEmbed,
  kSvmTrain,
  kNnTrain,
  kPredict,
  kExplain,
  kMorfEval,
  kContextReport,
  kVerify,
};

std::string StageName(Stage s);
// Throws UsageError for an unknown subcommand.
Stage ParseStage(const std::string& name);
const std::vector<Stage>& AllStages();

// Hash of the config sections `s` depends on, chained through its
// upstream stages.
std::string StageHash(const PipelineConfig& c, Stage s);

// Per-purpose seeds derived from the global seed.
struct StageSeeds {
  std::uint64_t corpus;
  std::uint64_t gmm;
  std::uint64_t svm;
  std::uint64_t nn_init;
  std::uint64_t nn_train;
  std::uint64_t morf;
};
StageSeeds DeriveSeeds(std::uint64_t seed);

// --- In-memory pipeline --------------------------------------------------

CorpusSpec MakeCorpusSpec(const PipelineConfig& c);
// Generated corpus with the artefact stamped on train and test images of
// artefact_class.
Corpus BuildCorpus(const PipelineConfig& c);
std::vector<std::string> ClassNames(const PipelineConfig& c);
// labels[c][i] = +1 if image i carries class c, else -1.
std::vector<std::vector<int>> LabelMatrix(std::span<const LabeledImage> images,
                                          const std::vector<std::string>& class_names);

struct FvTraining {
  FvModels models;
  std::vector<DescriptorSet> raw_descriptors;  // per train image, 128-d
  std::vector<std::vector<double>> train_fv;   // improved FVs
};

FvTraining TrainFv(std::span<const LabeledImage> train,
                   const std::vector<std::string>& class_names, const PipelineConfig& c);
NeuralNet TrainNn(std::span<const LabeledImage> train,
                  const std::vector<std::string>& class_names, const PipelineConfig& c,
                  NnTrainReport* report = nullptr);

Heatmap NnExplainHeatmap(const NeuralNet& net, const Image& img, int class_index,
                         const PipelineConfig& c);

// Index of the first class label of an image; throws KeyError.
int PrimaryClass(const LabeledImage& img, const std::vector<std::string>& class_names);

struct ContextExperiment {
  std::vector<ContextRow> rows;
  double fv_mean_mu = 0.0;
  double nn_mean_mu = 0.0;
};

// True-positive test images of each pipeline, explained for their class
// and reduced to the per-class mu table.
ContextExperiment RunContextExperiment(std::span<const LabeledImage> test,
                                       const std::vector<std::string>& class_names,
                                       const FvModels& fv, const NeuralNet& nn,
                                       const PipelineConfig& c);

// LRP orderings (configured variant, plus abs) against random ones on
// true-label test images.
MorfReport RunMorfExperiment(std::span<const LabeledImage> test, const FvModels& fv,
                             const std::vector<std::string>& class_names,
                             const PipelineConfig& c);

// --- Text reports --------------------------------------------------------

std::string FormatMorfReport(const MorfReport& r);
std::string FormatMorfCurves(const MorfReport& r);
std::string FormatContextTable(const ContextExperiment& e, ContextMode mode);

// --- Invariant suite -----------------------------------------------------

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Conservation, Hellinger, streaming-vs-materialized R2, incremental MoRF
// and NN per-layer balance on the given models and test descriptors.
std::vector<CheckResult> RunInvariantChecks(const FvModels& fv,
                                            std::span<const DescriptorSet> test_descriptors,
                                            const NeuralNet* nn,
                                            std::span<const std::vector<double>> nn_inputs,
                                            std::uint64_t seed);

// --- On-disk stages ------------------------------------------------------

struct StageOptions {
  std::string class_name;  // explain: restrict to this class
  std::string image_id;    // explain: restrict to this image (e.g. test/0003)
  std::string model = "fv";  // explain/predict: fv | nn
};

// Runs one subcommand against config.work_dir. Throws DependencyError when
// an upstream artifact is missing or was produced by a different config,
// and ValidationError when `verify` finds a failing check.
void RunStage(Stage s, const PipelineConfig& c, const StageOptions& opts, std::ostream& log);

}  // namespace fvlrp
