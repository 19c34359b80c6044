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


#include "fvlrp/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fvlrp/errors.h"
#include "fvlrp/fisher.h"
#include "fvlrp/model_io.h"
#include "fvlrp/parallel.h"

namespace fvlrp {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

std::string NnRuleName(NnRule r) { return r == NnRule::kEpsilon ? "eps" : "alphabeta"; }

NnRule ParseNnRule(const std::string& s) {
  if (s == "eps") return NnRule::kEpsilon;
  if (s == "alphabeta") return NnRule::kAlphaBeta;
  throw ParseError("unknown nn_rule '" + s + "' (expected eps or alphabeta)");
}

json CorpusSection(const PipelineConfig& c) {
  return {{"classes", c.num_classes},         {"context_correlation", c.context_correlation},
          {"width", c.image_width},           {"height", c.image_height},
          {"train_count", c.train_count},     {"test_count", c.test_count},
          {"artefact_class", c.artefact_class}};
}

json DescriptorSection(const PipelineConfig& c) {
  return {{"patch", c.patch}, {"stride", c.stride}, {"pca_dim", c.pca_dim},
          {"pca_whiten", c.pca_whiten}};
}

json GmmSection(const PipelineConfig& c) {
  return {{"components", c.gmm_components},
          {"max_iterations", c.gmm_max_iterations},
          {"tolerance", c.gmm_tolerance}};
}

json SvmSection(const PipelineConfig& c) {
  return {{"C", c.svm_c}, {"epochs", c.svm_epochs}};
}

json NnSection(const PipelineConfig& c) {
  return {{"hidden", c.nn_hidden},
          {"downscale", c.nn_downscale},
          {"epochs", c.nn_epochs},
          {"learning_rate", c.nn_learning_rate},
          {"batch_size", c.nn_batch_size}};
}

json LrpSection(const PipelineConfig& c) {
  return {{"variant", VariantName(c.variant)},   {"epsilon", c.epsilon},
          {"nn_rule", NnRuleName(c.nn_rule)},    {"nn_epsilon", c.nn_epsilon},
          {"alpha", c.alpha},                    {"beta", c.beta},
          {"context_mode", ContextModeName(c.context_mode)}};
}

json MorfSection(const PipelineConfig& c) {
  return {{"batch", c.morf_batch},
          {"steps", c.morf_steps},
          {"repetitions", c.morf_repetitions}};
}

json ConfigJson(const PipelineConfig& c) {
  return {{"seed", c.seed},
          {"corpus", CorpusSection(c)},
          {"descriptors", DescriptorSection(c)},
          {"gmm", GmmSection(c)},
          {"svm", SvmSection(c)},
          {"nn", NnSection(c)},
          {"lrp", LrpSection(c)},
          {"morf", MorfSection(c)}};
}

// Reads known keys of one object and rejects the rest.
class SectionReader {
 public:
  SectionReader(const json& obj, std::string name) : obj_(obj), name_(std::move(name)) {
    if (!obj_.is_object()) throw ParseError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void Read(const char* key, T& out) {
    known_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ParseError("config key '" + name_ + "." + key + "': " + e.what());
    }
  }

  ~SectionReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& item : obj_.items()) {
      if (!known_.count(item.key())) {
        throw ParseError("unknown config key '" + name_ + "." + item.key() + "'");
      }
    }
  }

 private:
  const json& obj_;
  std::string name_;
  std::set<std::string> known_;
};

// ---------------------------------------------------------------------------
// Formatting

std::string Num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string Exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string IndexedDump(const std::string& key, const std::vector<double>& values) {
  std::string out = key + " relevance\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += std::to_string(i) + " " + Exact(values[i]) + "\n";
  }
  return out;
}

std::string FourDigits(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", i);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared training steps

std::vector<DescriptorSet> ExtractAll(std::span<const LabeledImage> images,
                                      const PipelineConfig& c) {
  std::vector<DescriptorSet> out(images.size());
  ParallelFor(images.size(), [&](std::size_t i) {
    out[i] = ExtractDense(images[i].image, c.patch, c.stride);
  });
  return out;
}

std::vector<DescriptorSet> ProjectAll(const PcaModel& pca,
                                      std::span<const DescriptorSet> raw) {
  std::vector<DescriptorSet> out(raw.size());
  ParallelFor(raw.size(), [&](std::size_t i) { out[i] = PcaApply(pca, raw[i]); });
  return out;
}

GmmModel FitGmm(std::span<const DescriptorSet> projected, const PipelineConfig& c) {
  std::vector<std::vector<double>> data;
  for (const auto& ds : projected) {
    for (const auto& d : ds.descriptors) data.push_back(d.values);
  }
  EmOptions opts;
  opts.num_components = c.gmm_components;
  opts.seed = DeriveSeeds(c.seed).gmm;
  opts.max_iterations = c.gmm_max_iterations;
  opts.tolerance = c.gmm_tolerance;
  return EmFit(data, opts).model;
}

std::vector<std::vector<double>> RawFvAll(const GmmModel& gmm,
                                          std::span<const DescriptorSet> projected) {
  std::vector<std::vector<double>> out(projected.size());
  ParallelFor(projected.size(), [&](std::size_t i) { out[i] = Aggregate(gmm, projected[i]); });
  return out;
}

SvmModel FitSvm(std::span<const std::vector<double>> improved,
                const std::vector<std::string>& class_names,
                const std::vector<std::vector<int>>& labels, const PipelineConfig& c) {
  SvmTrainOptions opts;
  opts.C = c.svm_c;
  opts.epochs = c.svm_epochs;
  opts.seed = DeriveSeeds(c.seed).svm;
  return SvmTrain(improved, class_names, labels, opts);
}

std::vector<std::vector<double>> NetInputs(const NeuralNet& net,
                                           std::span<const LabeledImage> images) {
  std::vector<std::vector<double>> out(images.size());
  ParallelFor(images.size(), [&](std::size_t i) { out[i] = NetInput(net, images[i].image); });
  return out;
}

NeuralNet InitialNet(const std::vector<std::string>& class_names, const PipelineConfig& c) {
  if (c.image_width % c.nn_downscale != 0 || c.image_height % c.nn_downscale != 0) {
    throw ValidationError("image size is not a multiple of nn.downscale");
  }
  return MakeNet(c.image_width / c.nn_downscale, c.image_height / c.nn_downscale,
                 c.nn_downscale, c.nn_hidden, class_names, DeriveSeeds(c.seed).nn_init);
}

NnTrainOptions NnOptions(const PipelineConfig& c) {
  NnTrainOptions o;
  o.epochs = c.nn_epochs;
  o.learning_rate = c.nn_learning_rate;
  o.batch_size = c.nn_batch_size;
  o.seed = DeriveSeeds(c.seed).nn_train;
  return o;
}

R2Options R2Of(const PipelineConfig& c) { return {c.variant, c.epsilon}; }

std::vector<BoundingBox> BoxesOf(const LabeledImage& img, const std::string& label) {
  std::vector<BoundingBox> out;
  for (const auto& b : img.boxes) {
    if (b.label == label) out.push_back(b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Invariant checks

std::vector<double> MaterializedR2(const R3Map& r3, const GmmModel& gmm,
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
    if (!nz[d]) zero_mass += r3.values[d];
  }
  const double xi = zero_mass / static_cast<double>(n);
  std::vector<double> out(n);
  for (std::size_t l = 0; l < n; ++l) {
    double acc = 0.0;
    for (int d = 0; d < len; ++d) {
      if (!nz[d]) continue;
      double den = col[d];
      if (opts.variant == R2Variant::kEpsilon) {
        den = col[d] + opts.epsilon * (col[d] >= 0.0 ? 1.0 : -1.0);
      }
      const double share = absolute ? std::abs(m[l][d]) : m[l][d];
      acc += r3.values[d] * share / den;
    }
    out[l] = acc + xi;
  }
  return out;
}

double LayerSum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double LayerAbsSum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

// Largest relative violation of sum(R[k+1]) - sum(R[k]) = bias + rule.
double WorstLayerBalance(const LayerRelevance& r) {
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < r.relevance.size(); ++k) {
    const double upper = LayerSum(r.relevance[k + 1]);
    const double lower = LayerSum(r.relevance[k]);
    const double gap = upper - lower - r.bias_share[k] - r.rule_share[k];
    const double scale = std::max({LayerAbsSum(r.relevance[k + 1]),
                                   LayerAbsSum(r.relevance[k]), 1e-300});
    worst = std::max(worst, std::abs(gap) / scale);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Workspace

class Workspace {
 public:
  explicit Workspace(fs::path root) : root_(std::move(root)) {}

  fs::path Path(const std::string& rel) const { return root_ / rel; }

  fs::path ManifestPath(Stage s) const { return Path("manifests/" + StageName(s) + ".json"); }

  void WriteManifest(Stage s, const PipelineConfig& c, const std::vector<std::string>& outputs) const {
    const StageSeeds seeds = DeriveSeeds(c.seed);
    json j;
    j["stage"] = StageName(s);
    j["config_hash"] = StageHash(c, s);
    j["config"] = ConfigJson(c);
    j["seeds"] = {{"global", c.seed},        {"corpus", seeds.corpus},
                  {"gmm", seeds.gmm},        {"svm", seeds.svm},
                  {"nn_init", seeds.nn_init}, {"nn_train", seeds.nn_train},
                  {"morf", seeds.morf}};
    j["outputs"] = outputs;
    WriteText(ManifestPath(s), j.dump(1) + "\n");
  }

  bool IsFresh(Stage s, const PipelineConfig& c) const {
    if (!fs::exists(ManifestPath(s))) return false;
    const json j = ParseManifest(s);
    return j.value("config_hash", "") == StageHash(c, s);
  }

  void Require(Stage s, const PipelineConfig& c) const {
    const std::string name = StageName(s);
    if (!fs::exists(ManifestPath(s))) {
      throw DependencyError("missing output of stage '" + name + "'; run `fvlrp " + name +
                            "` first");
    }
    const json j = ParseManifest(s);
    if (j.value("config_hash", "") != StageHash(c, s)) {
      throw DependencyError("output of stage '" + name +
                            "' was produced with a different config; rerun `fvlrp " + name +
                            "`");
    }
  }

  void WriteText(const fs::path& p, const std::string& text) const {
    fs::create_directories(p.parent_path());
    WriteFileBytes(p, text);
  }

  template <typename Model>
  void SaveModelFile(const std::string& rel, const Model& m, const std::string& hash) const {
    WriteText(Path(rel), SerializeModel(m, hash));
  }

  std::string LoadModelText(const std::string& rel, Stage producer,
                            const PipelineConfig& c) const {
    Require(producer, c);
    const std::string text = ReadFileBytes(Path(rel));
    if (ReadModelHeader(text).config_hash != StageHash(c, producer)) {
      throw DependencyError("model " + rel + " is stale; rerun `fvlrp " + StageName(producer) +
                            "`");
    }
    return text;
  }

 private:
  json ParseManifest(Stage s) const {
    try {
      return json::parse(ReadFileBytes(ManifestPath(s)));
    } catch (const json::exception& e) {
      throw ParseError("corrupt manifest for " + StageName(s) + ": " + e.what());
    }
  }

  fs::path root_;
};

const char* kSplits[] = {"train", "test"};

std::string ImageId(const std::string& split, std::size_t i) {
  return split + "/" + FourDigits(i);
}

json BoxJson(const BoundingBox& b) {
  return {{"label", b.label}, {"xmin", b.xmin}, {"ymin", b.ymin},
          {"xmax", b.xmax},   {"ymax", b.ymax}};
}

BoundingBox BoxFromJson(const json& j) {
  BoundingBox b;
  b.label = j.at("label").get<std::string>();
  b.xmin = j.at("xmin").get<int>();
  b.ymin = j.at("ymin").get<int>();
  b.xmax = j.at("xmax").get<int>();
  b.ymax = j.at("ymax").get<int>();
  return b;
}

std::vector<std::string> SaveCorpus(const Workspace& ws, const Corpus& corpus,
                                    const std::vector<std::string>& class_names) {
  std::vector<std::string> outputs;
  json index;
  index["classes"] = class_names;
  for (const char* split : kSplits) {
    const auto& images = std::string(split) == "train" ? corpus.train : corpus.test;
    json list = json::array();
    for (std::size_t i = 0; i < images.size(); ++i) {
      const std::string id = ImageId(split, i);
      const LabeledImage& img = images[i];
      fs::create_directories(ws.Path(std::string("corpus/") + split));
      SaveImage(img.image, ws.Path("corpus/" + id + ".pgm"));
      SaveAnnotations(img.boxes, ws.Path("corpus/" + id + ".txt"));
      json entry = {{"id", id},
                    {"labels", img.labels},
                    {"background_id", img.background_id},
                    {"artefact_fallback", img.artefact_fallback}};
      entry["artefact"] = img.artefact ? BoxJson(*img.artefact) : json(nullptr);
      list.push_back(std::move(entry));
      outputs.push_back("corpus/" + id + ".pgm");
      outputs.push_back("corpus/" + id + ".txt");
    }
    index[split] = std::move(list);
  }
  ws.WriteText(ws.Path("corpus/index.json"), index.dump(1) + "\n");
  outputs.push_back("corpus/index.json");
  return outputs;
}

std::vector<LabeledImage> LoadSplit(const Workspace& ws, const std::string& split,
                                    std::vector<std::string>* ids) {
  json index;
  try {
    index = json::parse(ReadFileBytes(ws.Path("corpus/index.json")));
  } catch (const json::exception& e) {
    throw ParseError(std::string("corrupt corpus index: ") + e.what());
  }
  std::vector<LabeledImage> out;
  for (const json& entry : index.at(split)) {
    const std::string id = entry.at("id").get<std::string>();
    LabeledImage img;
    img.image = LoadImage(ws.Path("corpus/" + id + ".pgm"));
    img.boxes = LoadAnnotations(ws.Path("corpus/" + id + ".txt"));
    img.labels = entry.at("labels").get<std::vector<std::string>>();
    img.background_id = entry.at("background_id").get<int>();
    img.artefact_fallback = entry.at("artefact_fallback").get<bool>();
    if (!entry.at("artefact").is_null()) img.artefact = BoxFromJson(entry.at("artefact"));
    out.push_back(std::move(img));
    if (ids != nullptr) ids->push_back(id);
  }
  return out;
}

std::vector<DescriptorSet> LoadDescriptors(const Workspace& ws, const std::string& split,
                                           std::size_t count) {
  std::vector<DescriptorSet> out(count);
  ParallelFor(count, [&](std::size_t i) {
    out[i] = LoadDescriptorSet(ws.Path("descriptors/" + ImageId(split, i) + ".desc"));
  });
  return out;
}

std::vector<std::vector<double>> LoadRawFvs(const Workspace& ws, const std::string& split,
                                            std::size_t count) {
  std::vector<std::vector<double>> out(count);
  ParallelFor(count, [&](std::size_t i) {
    out[i] = LoadFisherVector(ws.Path("fv/" + ImageId(split, i) + ".fv")).values;
  });
  return out;
}

struct LoadedFv {
  FvModels models;
  std::vector<std::string> class_names;
};

LoadedFv LoadFvModels(const Workspace& ws, const PipelineConfig& c) {
  LoadedFv out;
  out.models.patch = c.patch;
  out.models.stride = c.stride;
  out.models.svm = DeserializeSvm(ws.LoadModelText("models/svm.json", Stage::kSvmTrain, c));
  out.models.pca = DeserializePca(ws.LoadModelText("models/pca.json", Stage::kPcaFit, c));
  out.models.gmm = DeserializeGmm(ws.LoadModelText("models/gmm.json", Stage::kGmmFit, c));
  for (const auto& cls : out.models.svm.classes) out.class_names.push_back(cls.name);
  return out;
}

NeuralNet LoadNet(const Workspace& ws, const PipelineConfig& c) {
  return DeserializeNet(ws.LoadModelText("models/nn.json", Stage::kNnTrain, c));
}

std::vector<std::vector<double>> ImprovedAll(std::span<const std::vector<double>> raw) {
  std::vector<std::vector<double>> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = Improve(raw[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Stages

void StageSynth(const Workspace& ws, const PipelineConfig& c, std::ostream& log) {
  const Corpus corpus = BuildCorpus(c);
  auto outputs = SaveCorpus(ws, corpus, ClassNames(c));
  ws.WriteManifest(Stage::kSynthGen, c, outputs);
  log << "synth-gen: " << corpus.train.size() << " train, " << corpus.test.size()
      << " test images\n";
}

void StageExtract(const Workspace& ws, const PipelineConfig& c, std::ostream& log) {
  ws.Require(Stage::kSynthGen, c);
  std::vector<std::string> outputs;
  for (const char* split : kSplits) {
    const auto images = LoadSplit(ws, split, nullptr);
    const auto sets = ExtractAll(images, c);
    fs::create_directories(ws.Path(std::string("descriptors/") + split));
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const std::string rel = "descriptors/" + ImageId(split, i) + ".desc";
      SaveDescriptorSet(sets[i], ws.Path(rel));
      outputs.push_back(rel);
    }
    log << "extract: " << split << " " << sets.size() << " images, "
        << (sets.empty() ? 0 : sets[0].size()) << " descriptors each\n";
  }
  ws.WriteManifest(Stage::kExtract, c, outputs);
}

void StagePca(const Workspace& ws, const PipelineConfig& c, std::ostream& log) {
  ws.Require(Stage::kExtract, c);
  const auto train = LoadSplit(ws, "train", nullptr);
  const auto raw = LoadDescriptors(ws, "train", train.size());
  const PcaModel pca = PcaFit(raw, c.pca_dim, c.pca_whiten);
  ws.SaveModelFile("models/pca.json", pca, StageHash(c, Stage::kPcaFit));
  ws.WriteManifest(Stage::kPcaFit, c, {"models/pca.json"});
  log << "pca-fit: " << pca.input_dim << " -> " << pca.output_dim << "\n";
}

void StageGmm(const Workspace& ws, const PipelineConfig& c, std::ostream& log) {
  const PcaModel pca = DeserializePca(ws.LoadModelText("models/pca.json", Stage::kPcaFit, c));
  const auto train = LoadSplit(ws, "train", nullptr);
  const auto projected = ProjectAll(pca, LoadDescriptors(ws, "train", train.size()));
  const GmmModel gmm = FitGmm(projected, c);
  ws.SaveModelFile("models/gmm.json", gmm, StageHash(c, Stage::kGmmFit));
  ws.WriteManifest(Stage::kGmmFit, c, {"models/gmm.json"});
  log << "gmm-fit: K=" << gmm.num_components << " D=" << gmm.dim << "\n";
}

void StageEmbed(const Workspace& ws, const PipelineConfig& c, std::ostream& log) {
  const PcaModel pca = DeserializePca(ws.LoadModelText("models/pca.json", Stage::kPcaFit, c));
  const GmmModel gmm = DeserializeGmm(ws.LoadModelText("models/gmm.json", Stage::kGmmFit, c));
  std::vector<std::string> outputs;
  for (const char* split : kSplits) {
    const auto images = LoadSplit(ws, split, nullptr);
    const auto fvs = RawFvAll(gmm, ProjectAll(pca, LoadDescriptors(ws, split, images.size())));
    fs::create_directories(ws.Path(std::string("fv/") + split));
    for (std::size_t i = 0; i < fvs.size(); ++i) {
      const std::string rel = "fv/" + ImageId(split, i) + ".fv";
      SaveFisherVector(fvs[i], gmm.num_components, gmm.dim, ws.Path(rel));
      outputs.push_back(rel);
    }
    log << "embed: " << split << " " << fvs.size() << " Fisher vectors of length "
        << FvLength(gmm) << "\n";
  }
  ws.WriteManifest(Stage::kEmbed, c, outputs);
}

void StageSvm(const Workspace& ws, const PipelineConfig& c, std::ostream& log) {
  ws.Require(Stage::kEmbed, c);
  const auto train = LoadSplit(ws, "train", nullptr);
  const auto names = ClassNames(c);
  const auto improved = ImprovedAll(LoadRawFvs(ws, "train", train.size()));
  const SvmModel svm = FitSvm(improved, names, LabelMatrix(train, names), c);
  ws.SaveModelFile("models/svm.json", svm, StageHash(c, Stage::kSvmTrain));
  ws.WriteManifest(Stage::kSvmTrain, c, {"models/svm.json"});
  log << "svm-train: " << svm.classes.size() << " one-vs-rest classifiers\n";
}

void StageNn(const Workspace& ws, const PipelineConfig& c, std::ostream& log) {
  ws.Require(Stage::kSynthGen, c);
  const auto train = LoadSplit(ws, "train", nullptr);
  NnTrainReport rep;
  const NeuralNet net = TrainNn(train, ClassNames(c), c, &rep);
  ws.SaveModelFile("models/nn.json", net, StageHash(c, Stage::kNnTrain));
  ws.WriteManifest(Stage::kNnTrain, c, {"models/nn.json"});
  log << "nn-train: hinge loss " << Num(rep.initial_loss) << " -> " << Num(rep.final_loss)
      << "\n";
}

void StagePredict(const Workspace& ws, const PipelineConfig& c, const StageOptions& opts,
                  std::ostream& log) {
  std::vector<std::string> ids;
  std::ostringstream out;
  std::vector<std::string> names;
  std::vector<std::vector<double>> scores;
  std::vector<LabeledImage> test;
  if (opts.model == "nn") {
    const NeuralNet net = LoadNet(ws, c);
    names = net.class_names;
    test = LoadSplit(ws, "test", &ids);
    const auto inputs = NetInputs(net, test);
    for (const auto& x : inputs) scores.push_back(Predict(net, x));
  } else {
    const LoadedFv fv = LoadFvModels(ws, c);
    ws.Require(Stage::kEmbed, c);
    names = fv.class_names;
    test = LoadSplit(ws, "test", &ids);
    for (const auto& raw : LoadRawFvs(ws, "test", test.size())) {
      scores.push_back(PredictMultilabel(fv.models.svm, Improve(raw)).scores);
    }
  }
  out << "# predict model=" << opts.model << "\n";
  out << "image truth";
  for (const auto& n : names) out << " score:" << n;
  out << " predicted\n";
  int correct = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << " " << test[i].labels.front();
    std::string predicted;
    for (std::size_t k = 0; k < names.size(); ++k) {
      out << " " << Exact(scores[i][k]);
      if (scores[i][k] > 0.0) predicted += (predicted.empty() ? "" : ",") + names[k];
    }
    out << " " << (predicted.empty() ? "-" : predicted) << "\n";
    if (predicted == test[i].labels.front()) ++correct;
  }
  out << "# exact-match accuracy " << Num(double(correct) / std::max<std::size_t>(1, ids.size()))
      << "\n";
  const std::string rel = "reports/predict-" + opts.model + ".txt";
  ws.WriteText(ws.Path(rel), out.str());
  ws.WriteManifest(Stage::kPredict, c, {rel});
  log << out.str();
}

void StageExplain(const Workspace& ws, const PipelineConfig& c, const StageOptions& opts,
                  std::ostream& log) {
  std::optional<LoadedFv> fv;
  std::optional<NeuralNet> net;
  std::vector<std::string> names;
  if (opts.model == "nn") {
    net = LoadNet(ws, c);
    names = net->class_names;
  } else {
    fv = LoadFvModels(ws, c);
    ws.Require(Stage::kExtract, c);
    names = fv->class_names;
  }
  std::vector<std::string> ids;
  const auto test = LoadSplit(ws, "test", &ids);
  int forced = -1;
  if (!opts.class_name.empty()) {
    const auto it = std::find(names.begin(), names.end(), opts.class_name);
    if (it == names.end()) throw KeyError("unknown class '" + opts.class_name + "'");
    forced = static_cast<int>(it - names.begin());
  }
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (opts.image_id.empty() || opts.image_id == ids[i]) selected.push_back(i);
  }
  if (selected.empty()) throw KeyError("unknown image '" + opts.image_id + "'");

  struct Row {
    int cls = 0;
    double score = 0.0;
    Heatmap h;
    std::vector<double> r3;
    std::vector<double> r2;
  };
  std::vector<Row> rows(selected.size());
  ParallelFor(selected.size(), [&](std::size_t q) {
    const std::size_t i = selected[q];
    const int cls = forced >= 0 ? forced : PrimaryClass(test[i], names);
    if (fv) {
      const DescriptorSet raw =
          LoadDescriptorSet(ws.Path("descriptors/" + ids[i] + ".desc"));
      const Explanation e = ExplainDescriptors(PcaApply(fv->models.pca, raw),
                                               test[i].image.width, test[i].image.height,
                                               fv->models, cls, R2Of(c));
      rows[q] = {cls, e.score, e.heatmap, e.r3.values, e.r2.values};
    } else {
      const auto x = NetInput(*net, test[i].image);
      rows[q] = {cls, Predict(*net, x)[cls], NnExplainHeatmap(*net, test[i].image, cls, c),
                 {}, {}};
    }
  });

  std::ostringstream out;
  std::vector<std::string> outputs;
  out << "# explain model=" << opts.model;
  if (fv) out << " variant=" << VariantName(c.variant) << " epsilon=" << Num(c.epsilon);
  out << "\nimage class score heatmap_sum\n";
  fs::create_directories(ws.Path("explain"));
  for (std::size_t q = 0; q < selected.size(); ++q) {
    const std::string& id = ids[selected[q]];
    std::string stem = id;
    std::replace(stem.begin(), stem.end(), '/', '-');
    stem = "explain/" + stem + "-" + names[rows[q].cls] + "-" + opts.model;
    SaveHeatmap(rows[q].h, ws.Path(stem + ".hmap"), HeatmapMode::kRaw);
    SaveHeatmap(rows[q].h, ws.Path(stem + ".ppm"), HeatmapMode::kRendered);
    outputs.push_back(stem + ".hmap");
    outputs.push_back(stem + ".ppm");
    if (fv) {
      ws.WriteText(ws.Path(stem + ".r3.txt"), IndexedDump("dim", rows[q].r3));
      ws.WriteText(ws.Path(stem + ".r2.txt"), IndexedDump("descriptor", rows[q].r2));
      outputs.push_back(stem + ".r3.txt");
      outputs.push_back(stem + ".r2.txt");
    }
    out << id << " " << names[rows[q].cls] << " " << Exact(rows[q].score) << " "
        << Exact(rows[q].h.Sum()) << "\n";
  }
  const std::string rel = "reports/explain-" + opts.model + ".txt";
  ws.WriteText(ws.Path(rel), out.str());
  outputs.push_back(rel);
  ws.WriteManifest(Stage::kExplain, c, outputs);
  log << out.str();
}

void StageMorf(const Workspace& ws, const PipelineConfig& c, std::ostream& log) {
  const LoadedFv fv = LoadFvModels(ws, c);
  ws.Require(Stage::kExtract, c);
  const auto test = LoadSplit(ws, "test", nullptr);
  const MorfReport report = RunMorfExperiment(test, fv.models, fv.class_names, c);
  ws.WriteText(ws.Path("reports/morf.txt"), FormatMorfReport(report));
  ws.WriteText(ws.Path("reports/morf_curves.txt"), FormatMorfCurves(report));
  ws.WriteManifest(Stage::kMorfEval, c, {"reports/morf.txt", "reports/morf_curves.txt"});
  log << FormatMorfReport(report);
}

void StageContext(const Workspace& ws, const PipelineConfig& c, std::ostream& log) {
  const LoadedFv fv = LoadFvModels(ws, c);
  const NeuralNet net = LoadNet(ws, c);
  const auto test = LoadSplit(ws, "test", nullptr);
  const ContextExperiment e = RunContextExperiment(test, fv.class_names, fv.models, net, c);
  const std::string text = FormatContextTable(e, c.context_mode);
  ws.WriteText(ws.Path("reports/context.txt"), text);
  ws.WriteManifest(Stage::kContextReport, c, {"reports/context.txt"});
  log << text;
}

void StageVerify(const Workspace& ws, const PipelineConfig& c, std::ostream& log) {
  const LoadedFv fv = LoadFvModels(ws, c);
  ws.Require(Stage::kExtract, c);
  const auto test = LoadSplit(ws, "test", nullptr);
  const auto projected = ProjectAll(fv.models.pca, LoadDescriptors(ws, "test", test.size()));
  std::optional<NeuralNet> net;
  std::vector<std::vector<double>> inputs;
  if (ws.IsFresh(Stage::kNnTrain, c)) {
    net = LoadNet(ws, c);
    inputs = NetInputs(*net, test);
  }
  const auto checks = RunInvariantChecks(fv.models, projected, net ? &*net : nullptr, inputs,
                                         DeriveSeeds(c.seed).morf);
  std::ostringstream out;
  bool ok = true;
  for (const auto& r : checks) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " " << r.detail << "\n";
    ok = ok && r.passed;
  }
  if (!net) out << "SKIP nn-layer-balance (nn-train not run for this config)\n";
  ws.WriteText(ws.Path("reports/verify.txt"), out.str());
  log << out.str();
  if (!ok) throw ValidationError("invariant checks failed; see reports/verify.txt");
  ws.WriteManifest(Stage::kVerify, c, {"reports/verify.txt"});
}

}  // namespace

// ---------------------------------------------------------------------------
// Config API

void PipelineConfig::Validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError("config: " + what);
  };
  require(num_classes >= 1, "corpus.classes must be >= 1");
  require(context_correlation >= 0.0 && context_correlation <= 1.0,
          "corpus.context_correlation must be in [0, 1]");
  require(train_count >= 1 && test_count >= 1, "corpus counts must be >= 1");
  require(patch >= 4 && patch % 4 == 0, "descriptors.patch must be a positive multiple of 4");
  require(stride >= 1, "descriptors.stride must be >= 1");
  require(pca_dim >= 1 && pca_dim <= kRawDescriptorDim, "descriptors.pca_dim out of range");
  require(gmm_components >= 1, "gmm.components must be >= 1");
  require(gmm_max_iterations >= 0, "gmm.max_iterations must be >= 0");
  require(gmm_tolerance >= 0.0, "gmm.tolerance must be >= 0");
  require(svm_c > 0.0, "svm.C must be positive");
  require(svm_epochs >= 1, "svm.epochs must be >= 1");
  require(nn_downscale >= 1, "nn.downscale must be >= 1");
  for (int h : nn_hidden) require(h >= 1, "nn.hidden widths must be >= 1");
  require(nn_epochs >= 0 && nn_batch_size >= 1, "nn epochs/batch_size out of range");
  require(nn_learning_rate >= 0.0, "nn.learning_rate must be >= 0");
  require(variant != R2Variant::kEpsilon || epsilon > 0.0, "lrp.epsilon must be positive");
  require(nn_epsilon >= 0.0, "lrp.nn_epsilon must be >= 0");
  require(morf_batch >= 1 && morf_steps >= 1 && morf_repetitions >= 1,
          "morf parameters must be >= 1");
  if (!artefact_class.empty()) {
    const auto names = ClassNames(*this);
    require(std::find(names.begin(), names.end(), artefact_class) != names.end(),
            "corpus.artefact_class is not a class name");
  }
}

PipelineConfig ParseConfig(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig c;
  std::string work_dir = c.work_dir.string();
  {
    SectionReader top(j, "config");
    top.Read("seed", c.seed);
    top.Read("work_dir", work_dir);
    json corpus = json::object(), desc = json::object(), gmm = json::object(),
         svm = json::object(), nn = json::object(), lrp = json::object(),
         morf = json::object();
    top.Read("corpus", corpus);
    top.Read("descriptors", desc);
    top.Read("gmm", gmm);
    top.Read("svm", svm);
    top.Read("nn", nn);
    top.Read("lrp", lrp);
    top.Read("morf", morf);
    {
      SectionReader r(corpus, "corpus");
      r.Read("classes", c.num_classes);
      r.Read("context_correlation", c.context_correlation);
      r.Read("width", c.image_width);
      r.Read("height", c.image_height);
      r.Read("train_count", c.train_count);
      r.Read("test_count", c.test_count);
      r.Read("artefact_class", c.artefact_class);
    }
    {
      SectionReader r(desc, "descriptors");
      r.Read("patch", c.patch);
      r.Read("stride", c.stride);
      r.Read("pca_dim", c.pca_dim);
      r.Read("pca_whiten", c.pca_whiten);
    }
    {
      SectionReader r(gmm, "gmm");
      r.Read("components", c.gmm_components);
      r.Read("max_iterations", c.gmm_max_iterations);
      r.Read("tolerance", c.gmm_tolerance);
    }
    {
      SectionReader r(svm, "svm");
      r.Read("C", c.svm_c);
      r.Read("epochs", c.svm_epochs);
    }
    {
      SectionReader r(nn, "nn");
      r.Read("hidden", c.nn_hidden);
      r.Read("downscale", c.nn_downscale);
      r.Read("epochs", c.nn_epochs);
      r.Read("learning_rate", c.nn_learning_rate);
      r.Read("batch_size", c.nn_batch_size);
    }
    {
      SectionReader r(lrp, "lrp");
      std::string variant = VariantName(c.variant);
      std::string rule = NnRuleName(c.nn_rule);
      std::string mode = ContextModeName(c.context_mode);
      r.Read("variant", variant);
      r.Read("epsilon", c.epsilon);
      r.Read("nn_rule", rule);
      r.Read("nn_epsilon", c.nn_epsilon);
      r.Read("alpha", c.alpha);
      r.Read("beta", c.beta);
      r.Read("context_mode", mode);
      try {
        c.variant = ParseVariant(variant);
        c.context_mode = ParseContextMode(mode);
      } catch (const UsageError& e) {
        throw ParseError(e.what());
      }
      c.nn_rule = ParseNnRule(rule);
    }
    {
      SectionReader r(morf, "morf");
      r.Read("batch", c.morf_batch);
      r.Read("steps", c.morf_steps);
      r.Read("repetitions", c.morf_repetitions);
    }
  }
  c.work_dir = work_dir;
  return c;
}

PipelineConfig LoadConfig(const fs::path& path) { return ParseConfig(ReadFileBytes(path)); }

std::string ConfigToJson(const PipelineConfig& c) { return ConfigJson(c).dump(1) + "\n"; }

std::string StageName(Stage s) {
  switch (s) {
    case Stage::kSynthGen: return "synth-gen";
    case Stage::kExtract: return "extract";
    case Stage::kPcaFit: return "pca-fit";
    case Stage::kGmmFit: return "gmm-fit";
    case Stage::kEmbed: return "embed";
    case Stage::kSvmTrain: return "svm-train";
    case Stage::kNnTrain: return "nn-train";
    case Stage::kPredict: return "predict";
    case Stage::kExplain: return "explain";
    case Stage::kMorfEval: return "morf-eval";
    case Stage::kContextReport: return "context-report";
    case Stage::kVerify: return "verify";
  }
  return "?";
}

const std::vector<Stage>& AllStages() {
  static const std::vector<Stage> all = {
      Stage::kSynthGen, Stage::kExtract,  Stage::kPcaFit,   Stage::kGmmFit,
      Stage::kEmbed,    Stage::kSvmTrain, Stage::kNnTrain,  Stage::kPredict,
      Stage::kExplain,  Stage::kMorfEval, Stage::kContextReport, Stage::kVerify};
  return all;
}

Stage ParseStage(const std::string& name) {
  for (Stage s : AllStages()) {
    if (StageName(s) == name) return s;
  }
  throw UsageError("unknown subcommand '" + name + "'");
}

std::string StageHash(const PipelineConfig& c, Stage s) {
  json j;
  j["stage"] = StageName(s);
  switch (s) {
    case Stage::kSynthGen:
      j["seed"] = c.seed;
      j["corpus"] = CorpusSection(c);
      break;
    case Stage::kExtract:
      j["up"] = StageHash(c, Stage::kSynthGen);
      j["patch"] = c.patch;
      j["stride"] = c.stride;
      break;
    case Stage::kPcaFit:
      j["up"] = StageHash(c, Stage::kExtract);
      j["pca_dim"] = c.pca_dim;
      j["pca_whiten"] = c.pca_whiten;
      break;
    case Stage::kGmmFit:
      j["up"] = StageHash(c, Stage::kPcaFit);
      j["gmm"] = GmmSection(c);
      break;
    case Stage::kEmbed:
      j["up"] = StageHash(c, Stage::kGmmFit);
      break;
    case Stage::kSvmTrain:
      j["up"] = StageHash(c, Stage::kEmbed);
      j["svm"] = SvmSection(c);
      break;
    case Stage::kNnTrain:
      j["up"] = StageHash(c, Stage::kSynthGen);
      j["nn"] = NnSection(c);
      break;
    case Stage::kPredict:
    case Stage::kExplain:
    case Stage::kContextReport:
    case Stage::kVerify:
      j["svm"] = StageHash(c, Stage::kSvmTrain);
      j["nn"] = StageHash(c, Stage::kNnTrain);
      j["lrp"] = LrpSection(c);
      break;
    case Stage::kMorfEval:
      j["svm"] = StageHash(c, Stage::kSvmTrain);
      j["lrp"] = LrpSection(c);
      j["morf"] = MorfSection(c);
      break;
  }
  return HashHex(j.dump());
}

StageSeeds DeriveSeeds(std::uint64_t seed) {
  return {MixSeed(seed, 1), MixSeed(seed, 2), MixSeed(seed, 3),
          MixSeed(seed, 4), MixSeed(seed, 5), MixSeed(seed, 6)};
}

// ---------------------------------------------------------------------------
// In-memory pipeline

CorpusSpec MakeCorpusSpec(const PipelineConfig& c) {
  CorpusSpec spec = DefaultCorpusSpec(c.num_classes, c.context_correlation,
                                      DeriveSeeds(c.seed).corpus);
  spec.width = c.image_width;
  spec.height = c.image_height;
  spec.train_count = c.train_count;
  spec.test_count = c.test_count;
  return spec;
}

std::vector<std::string> ClassNames(const PipelineConfig& c) {
  std::vector<std::string> names;
  for (const auto& a : DefaultCorpusSpec(c.num_classes, 0.0, 1).classes) {
    names.push_back(a.name);
  }
  return names;
}

Corpus BuildCorpus(const PipelineConfig& c) {
  c.Validate();
  Corpus corpus = GenerateCorpus(MakeCorpusSpec(c));
  if (!c.artefact_class.empty()) {
    for (auto* split : {&corpus.train, &corpus.test}) {
      for (auto& img : *split) img = InjectArtefact(img, c.artefact_class);
    }
  }
  return corpus;
}

std::vector<std::vector<int>> LabelMatrix(std::span<const LabeledImage> images,
                                          const std::vector<std::string>& class_names) {
  std::vector<std::vector<int>> labels(class_names.size(),
                                       std::vector<int>(images.size(), -1));
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      const auto& l = images[i].labels;
      if (std::find(l.begin(), l.end(), class_names[c]) != l.end()) labels[c][i] = 1;
    }
  }
  return labels;
}

int PrimaryClass(const LabeledImage& img, const std::vector<std::string>& class_names) {
  if (img.labels.empty()) throw KeyError("image has no labels");
  const auto it = std::find(class_names.begin(), class_names.end(), img.labels.front());
  if (it == class_names.end()) throw KeyError("unknown label '" + img.labels.front() + "'");
  return static_cast<int>(it - class_names.begin());
}

FvTraining TrainFv(std::span<const LabeledImage> train,
                   const std::vector<std::string>& class_names, const PipelineConfig& c) {
  c.Validate();
  FvTraining t;
  t.models.patch = c.patch;
  t.models.stride = c.stride;
  t.raw_descriptors = ExtractAll(train, c);
  t.models.pca = PcaFit(t.raw_descriptors, c.pca_dim, c.pca_whiten);
  const auto projected = ProjectAll(t.models.pca, t.raw_descriptors);
  t.models.gmm = FitGmm(projected, c);
  t.train_fv = ImprovedAll(RawFvAll(t.models.gmm, projected));
  t.models.svm = FitSvm(t.train_fv, class_names, LabelMatrix(train, class_names), c);
  return t;
}

NeuralNet TrainNn(std::span<const LabeledImage> train,
                  const std::vector<std::string>& class_names, const PipelineConfig& c,
                  NnTrainReport* report) {
  c.Validate();
  NeuralNet net = InitialNet(class_names, c);
  const auto inputs = NetInputs(net, train);
  return NnTrain(std::move(net), inputs, LabelMatrix(train, class_names), NnOptions(c), report);
}

Heatmap NnExplainHeatmap(const NeuralNet& net, const Image& img, int class_index,
                         const PipelineConfig& c) {
  const auto x = NetInput(net, img);
  const LayerRelevance r = c.nn_rule == NnRule::kEpsilon
                               ? LrpEpsilon(net, x, class_index, c.nn_epsilon)
                               : LrpAlphaBeta(net, x, class_index, c.alpha, c.beta);
  return NnHeatmap(net, r, img.width, img.height);
}

ContextExperiment RunContextExperiment(std::span<const LabeledImage> test,
                                       const std::vector<std::string>& class_names,
                                       const FvModels& fv, const NeuralNet& nn,
                                       const PipelineConfig& c) {
  struct Slot {
    bool fv_tp = false;
    bool nn_tp = false;
    Heatmap fv_h;
    Heatmap nn_h;
  };
  std::vector<Slot> slots(test.size());
  ParallelFor(test.size(), [&](std::size_t i) {
    const int cls = PrimaryClass(test[i], class_names);
    const Explanation e = Explain(test[i].image, fv, cls, R2Of(c));
    if (e.score > 0.0) {
      slots[i].fv_tp = true;
      slots[i].fv_h = e.heatmap;
    }
    const double f = Predict(nn, NetInput(nn, test[i].image))[cls];
    if (f > 0.0) {
      slots[i].nn_tp = true;
      slots[i].nn_h = NnExplainHeatmap(nn, test[i].image, cls, c);
    }
  });
  std::vector<ContextEntry> fv_entries;
  std::vector<ContextEntry> nn_entries;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int cls = PrimaryClass(test[i], class_names);
    const auto boxes = BoxesOf(test[i], class_names[cls]);
    const std::string id = ImageId("test", i);
    if (slots[i].fv_tp) fv_entries.push_back({id, cls, std::move(slots[i].fv_h), boxes});
    if (slots[i].nn_tp) nn_entries.push_back({id, cls, std::move(slots[i].nn_h), boxes});
  }
  ContextExperiment e;
  e.rows = ContextTable(class_names, fv_entries, nn_entries, c.context_mode);
  e.fv_mean_mu = OverallMeanMu(e.rows, true);
  e.nn_mean_mu = OverallMeanMu(e.rows, false);
  return e;
}

MorfReport RunMorfExperiment(std::span<const LabeledImage> test, const FvModels& fv,
                             const std::vector<std::string>& class_names,
                             const PipelineConfig& c) {
  std::vector<MorfItem> items(test.size());
  ParallelFor(test.size(), [&](std::size_t i) {
    items[i].image_id = ImageId("test", i);
    items[i].class_index = PrimaryClass(test[i], class_names);
    items[i].descriptors = ProjectedDescriptors(test[i].image, fv);
  });
  std::vector<OrderingSpec> orderings;
  orderings.push_back({"lrp-" + VariantName(c.variant), false, R2Of(c)});
  if (c.variant != R2Variant::kAbsolute) {
    orderings.push_back({"lrp-abs", false, {R2Variant::kAbsolute, c.epsilon}});
  }
  orderings.push_back({"random", true, {}});
  CompareOptions opts;
  opts.morf.batch = c.morf_batch;
  opts.morf.steps = c.morf_steps;
  opts.repetitions = c.morf_repetitions;
  opts.seed = DeriveSeeds(c.seed).morf;
  return CompareOrderings(items, fv.gmm, fv.svm, orderings, opts);
}

// ---------------------------------------------------------------------------
// Reports

std::string FormatMorfReport(const MorfReport& r) {
  std::ostringstream out;
  const auto& first = r.orderings.front().traces.front();
  out << "# morf-eval images=" << r.image_ids.size() << " batch=" << first.batch
      << " steps=" << first.scores.size()
      << " repetitions=" << r.orderings.front().traces.size() / r.image_ids.size() << "\n";
  out << "ordering mean_A se_A V first_switch_histogram\n";
  for (const auto& o : r.orderings) {
    out << o.name << " " << Num(o.mean_area) << " " << Num(o.se_area) << " "
        << Num(o.stats.switch_fraction) << " ";
    for (std::size_t i = 0; i < o.stats.histogram.size(); ++i) {
      out << (i ? "," : "") << o.stats.histogram[i];
    }
    out << "\n";
  }
  return out.str();
}

std::string FormatMorfCurves(const MorfReport& r) {
  std::ostringstream out;
  out << "ordering image repetition step f\n";
  for (const auto& o : r.orderings) {
    const std::size_t reps = o.traces.size() / r.image_ids.size();
    for (std::size_t t = 0; t < o.traces.size(); ++t) {
      const auto& tr = o.traces[t];
      const std::string prefix =
          o.name + " " + r.image_ids[t / reps] + " " + std::to_string(t % reps) + " ";
      out << prefix << 0 << " " << Exact(tr.original) << "\n";
      for (std::size_t i = 0; i < tr.scores.size(); ++i) {
        out << prefix << i + 1 << " " << Exact(tr.scores[i]) << "\n";
      }
    }
  }
  return out.str();
}

std::string FormatContextTable(const ContextExperiment& e, ContextMode mode) {
  std::ostringstream out;
  out << "# context-report mode=" << ContextModeName(mode) << "\n";
  out << "class fv_mu fv_used fv_undefined nn_mu nn_used nn_undefined\n";
  auto cell = [&](const ContextCell& c) {
    if (c.missing) return std::string("missing 0 0");
    return Num(c.mean_mu) + " " + std::to_string(c.used) + " " + std::to_string(c.undefined);
  };
  for (const auto& r : e.rows) {
    out << r.class_name << " " << cell(r.fv) << " " << cell(r.nn) << "\n";
  }
  out << "# mean fv_mu=" << Num(e.fv_mean_mu) << " nn_mu=" << Num(e.nn_mean_mu) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Invariant checks

std::vector<CheckResult> RunInvariantChecks(const FvModels& fv,
                                            std::span<const DescriptorSet> test_descriptors,
                                            const NeuralNet* nn,
                                            std::span<const std::vector<double>> nn_inputs,
                                            std::uint64_t seed) {
  std::vector<CheckResult> results;
  const std::size_t n = test_descriptors.size();
  const int num_classes = static_cast<int>(fv.svm.classes.size());
  if (n == 0) throw EmptyInputError("no test descriptors to verify");

  std::vector<std::vector<double>> raw(n);
  ParallelFor(n, [&](std::size_t i) { raw[i] = Aggregate(fv.gmm, test_descriptors[i]); });

  // Conservation of R3 (all variants share it) and of R2/R1 for abs.
  {
    std::vector<double> worst(n, 0.0);
    ParallelFor(n, [&](std::size_t i) {
      const auto phi = Improve(raw[i]);
      const DescriptorSet& ds = test_descriptors[i];
      for (int cls = 0; cls < num_classes; ++cls) {
        const R3Map r3 = RelevanceR3(fv.svm, phi, cls);
        const double f = r3.score;
        const double scale = std::max(std::abs(f), 1e-300);
        worst[i] = std::max(worst[i], std::abs(LayerSum(r3.values) - f) / scale);
        const MappingMatrixView view(fv.gmm, ds);
        const R2Map r2 = RelevanceR2(r3, view, {R2Variant::kAbsolute, 0.0});
        worst[i] = std::max(worst[i], std::abs(LayerSum(r2.values) - f) / scale);
        const Heatmap h = RelevanceR1(r2, ds, ds.image_width, ds.image_height);
        worst[i] = std::max(worst[i], std::abs(h.Sum() - f) / scale);
      }
    });
    const double w = *std::max_element(worst.begin(), worst.end());
    results.push_back({"conservation", w <= 1e-9, "max relative error " + Num(w)});
  }

  // Improved-FV dot products equal the Hellinger form of the raw FVs.
  {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const HellingerCheck h = CheckHellinger(raw[i], raw[(i + 1) % n]);
      worst = std::max(worst, std::abs(h.lhs - h.rhs) / std::max(1.0, std::abs(h.lhs)));
    }
    results.push_back({"hellinger", worst <= 1e-10, "max error " + Num(worst)});
  }

  // Streaming R2 equals the materialized-matrix computation bit for bit.
  {
    bool same = true;
    const std::size_t count = std::min<std::size_t>(n, 3);
    for (std::size_t i = 0; i < count && same; ++i) {
      const R3Map r3 = RelevanceR3(fv.svm, Improve(raw[i]), 0);
      const MappingMatrixView view(fv.gmm, test_descriptors[i]);
      for (R2Variant v : {R2Variant::kEpsilon, R2Variant::kAbsolute}) {
        const R2Options o{v, 100.0};
        same = same && RelevanceR2(r3, view, o).values ==
                           MaterializedR2(r3, fv.gmm, test_descriptors[i], o);
      }
    }
    results.push_back({"r2-streaming-oracle", same,
                       std::to_string(count) + " images, eps and abs variants"});
  }

  // Incremental MoRF update equals recomputation from the mutated set.
  {
    const DescriptorSet& ds = test_descriptors[0];
    MorfOptions o;
    o.batch = 1;
    o.steps = static_cast<int>(std::min<std::size_t>(20, ds.size()));
    Rng rng(seed);
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    MorfState state;
    MorfReplace(ds, fv.gmm, fv.svm, 0, order, o, rng, &state);
    const auto full = Aggregate(fv.gmm, state.mutated);
    double diff = 0.0;
    double mag = 0.0;
    for (std::size_t d = 0; d < full.size(); ++d) {
      diff = std::max(diff, std::abs(full[d] - state.raw_fv[d]));
      mag = std::max(mag, std::abs(full[d]));
    }
    const double rel = diff / std::max(mag, 1e-300);
    results.push_back({"morf-incremental", rel <= 1e-9,
                       std::to_string(o.steps) + " steps, relative error " + Num(rel)});
  }

  if (nn != nullptr) {
    double worst = 0.0;
    const std::size_t count = std::min<std::size_t>(nn_inputs.size(), 10);
    for (std::size_t i = 0; i < count; ++i) {
      for (int cls = 0; cls < static_cast<int>(nn->class_names.size()); ++cls) {
        worst = std::max(worst, WorstLayerBalance(LrpEpsilon(*nn, nn_inputs[i], cls, 0.01)));
        worst = std::max(worst, WorstLayerBalance(LrpAlphaBeta(*nn, nn_inputs[i], cls, 2, 1)));
      }
    }
    results.push_back({"nn-layer-balance", worst <= 1e-9,
                       "per-layer deficit equals bias + rule share, max error " + Num(worst)});
  }
  return results;
}

// ---------------------------------------------------------------------------

void RunStage(Stage s, const PipelineConfig& c, const StageOptions& opts, std::ostream& log) {
  c.Validate();
  if (opts.model != "fv" && opts.model != "nn") {
    throw UsageError("unknown model '" + opts.model + "' (expected fv or nn)");
  }
  const Workspace ws(c.work_dir);
  switch (s) {
    case Stage::kSynthGen: return StageSynth(ws, c, log);
    case Stage::kExtract: return StageExtract(ws, c, log);
    case Stage::kPcaFit: return StagePca(ws, c, log);
    case Stage::kGmmFit: return StageGmm(ws, c, log);
    case Stage::kEmbed: return StageEmbed(ws, c, log);
    case Stage::kSvmTrain: return StageSvm(ws, c, log);
    case Stage::kNnTrain: return StageNn(ws, c, log);
    case Stage::kPredict: return StagePredict(ws, c, opts, log);
    case Stage::kExplain: return StageExplain(ws, c, opts, log);
    case Stage::kMorfEval: return StageMorf(ws, c, log);
    case Stage::kContextReport: return StageContext(ws, c, log);
    case Stage::kVerify: return StageVerify(ws, c, log);
  }
}

}  // namespace fvlrp
