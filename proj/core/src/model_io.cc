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


#include "fvlrp/model_io.h"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "fvlrp/errors.h"

namespace fvlrp {
namespace {

using nlohmann::json;

constexpr char kFormat[] = "fvlrp-model";

json Envelope(const std::string& kind, const std::string& config_hash) {
  json j;
  j["format"] = kFormat;
  j["version"] = kModelSchemaVersion;
  j["kind"] = kind;
  j["config_hash"] = config_hash;
  return j;
}

std::string Dump(const json& j) { return j.dump(1) + "\n"; }

json ParseJson(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
}

const json& Field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) {
    throw ParseError(std::string("missing field '") + name + "'");
  }
  return j.at(name);
}

template <typename T>
T Get(const json& j, const char* name) {
  try {
    return Field(j, name).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("field '") + name + "' has the wrong type: " + e.what());
  }
}

ModelHeader HeaderOf(const json& j) {
  if (Get<std::string>(j, "format") != kFormat) throw ParseError("not an fvlrp model");
  ModelHeader h;
  h.version = Get<int>(j, "version");
  if (h.version != kModelSchemaVersion) {
    throw VersionError("model schema version " + std::to_string(h.version) +
                       ", expected " + std::to_string(kModelSchemaVersion));
  }
  h.kind = Get<std::string>(j, "kind");
  h.config_hash = Get<std::string>(j, "config_hash");
  return h;
}

json Open(const std::string& text, const std::string& kind, ModelHeader* header) {
  json j = ParseJson(text);
  ModelHeader h = HeaderOf(j);
  if (h.kind != kind) throw ParseError("expected a " + kind + " model, found " + h.kind);
  if (header != nullptr) *header = h;
  return j;
}

void ExpectSize(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ParseError(std::string(what) + " has " + std::to_string(got) +
                     " entries, expected " + std::to_string(want));
  }
}

std::string ActivationName(Activation a) {
  return a == Activation::kRelu ? "relu" : "identity";
}

Activation ParseActivation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "identity") return Activation::kIdentity;
  throw ParseError("unknown activation '" + s + "'");
}

}  // namespace

ModelHeader ReadModelHeader(const std::string& text) { return HeaderOf(ParseJson(text)); }

std::string SerializeModel(const PcaModel& m, const std::string& config_hash) {
  json j = Envelope("pca", config_hash);
  j["input_dim"] = m.input_dim;
  j["output_dim"] = m.output_dim;
  j["whiten"] = m.whiten;
  j["mean"] = m.mean;
  j["eigenvalues"] = m.eigenvalues;
  j["basis"] = m.basis;
  return Dump(j);
}

std::string SerializeModel(const GmmModel& m, const std::string& config_hash) {
  json j = Envelope("gmm", config_hash);
  j["num_components"] = m.num_components;
  j["dim"] = m.dim;
  j["weights"] = m.weights;
  j["means"] = m.means;
  j["sigmas"] = m.sigmas;
  return Dump(j);
}

std::string SerializeModel(const SvmModel& m, const std::string& config_hash) {
  json j = Envelope("svm", config_hash);
  j["C"] = m.C;
  j["epochs"] = m.epochs;
  j["seed"] = m.seed;
  json classes = json::array();
  for (const auto& c : m.classes) {
    classes.push_back({{"name", c.name}, {"w", c.w}, {"b", c.b}, {"dual_coef", c.dual_coef}});
  }
  j["classes"] = std::move(classes);
  j["support"] = m.support;
  return Dump(j);
}

std::string SerializeModel(const NeuralNet& m, const std::string& config_hash) {
  json j = Envelope("nn", config_hash);
  j["input_width"] = m.input_width;
  j["input_height"] = m.input_height;
  j["downscale"] = m.downscale;
  j["input_offset"] = m.input_offset;
  j["class_names"] = m.class_names;
  json layers = json::array();
  for (const auto& l : m.layers) {
    layers.push_back({{"in", l.in},
                      {"out", l.out},
                      {"activation", ActivationName(l.activation)},
                      {"weights", l.weights},
                      {"bias", l.bias}});
  }
  j["layers"] = std::move(layers);
  return Dump(j);
}

PcaModel DeserializePca(const std::string& text, ModelHeader* header) {
  const json j = Open(text, "pca", header);
  PcaModel m;
  m.input_dim = Get<int>(j, "input_dim");
  m.output_dim = Get<int>(j, "output_dim");
  m.whiten = Get<bool>(j, "whiten");
  m.mean = Get<std::vector<double>>(j, "mean");
  m.eigenvalues = Get<std::vector<double>>(j, "eigenvalues");
  m.basis = Get<std::vector<double>>(j, "basis");
  if (m.input_dim < 1 || m.output_dim < 1) throw ParseError("invalid PCA dimensions");
  ExpectSize(m.mean.size(), m.input_dim, "mean");
  ExpectSize(m.eigenvalues.size(), m.output_dim, "eigenvalues");
  ExpectSize(m.basis.size(), std::size_t(m.input_dim) * m.output_dim, "basis");
  return m;
}

GmmModel DeserializeGmm(const std::string& text, ModelHeader* header) {
  const json j = Open(text, "gmm", header);
  GmmModel m;
  m.num_components = Get<int>(j, "num_components");
  m.dim = Get<int>(j, "dim");
  m.weights = Get<std::vector<double>>(j, "weights");
  m.means = Get<std::vector<double>>(j, "means");
  m.sigmas = Get<std::vector<double>>(j, "sigmas");
  if (m.num_components < 1 || m.dim < 1) throw ParseError("invalid GMM dimensions");
  ExpectSize(m.weights.size(), m.num_components, "weights");
  ExpectSize(m.means.size(), std::size_t(m.num_components) * m.dim, "means");
  ExpectSize(m.sigmas.size(), std::size_t(m.num_components) * m.dim, "sigmas");
  m.Validate();
  return m;
}

SvmModel DeserializeSvm(const std::string& text, ModelHeader* header) {
  const json j = Open(text, "svm", header);
  SvmModel m;
  m.C = Get<double>(j, "C");
  m.epochs = Get<int>(j, "epochs");
  m.seed = Get<std::uint64_t>(j, "seed");
  for (const json& c : Field(j, "classes")) {
    SvmClassifier cls;
    cls.name = Get<std::string>(c, "name");
    cls.w = Get<std::vector<double>>(c, "w");
    cls.b = Get<double>(c, "b");
    cls.dual_coef = Get<std::vector<double>>(c, "dual_coef");
    m.classes.push_back(std::move(cls));
  }
  m.support = Get<std::vector<std::vector<double>>>(j, "support");
  if (m.classes.empty()) throw ParseError("SVM model has no classes");
  for (const auto& c : m.classes) {
    ExpectSize(c.w.size(), m.classes.front().w.size(), "w");
    if (!c.dual_coef.empty()) ExpectSize(c.dual_coef.size(), m.support.size(), "dual_coef");
  }
  for (const auto& s : m.support) ExpectSize(s.size(), m.classes.front().w.size(), "support");
  return m;
}

NeuralNet DeserializeNet(const std::string& text, ModelHeader* header) {
  const json j = Open(text, "nn", header);
  NeuralNet m;
  m.input_width = Get<int>(j, "input_width");
  m.input_height = Get<int>(j, "input_height");
  m.downscale = Get<int>(j, "downscale");
  m.input_offset = Get<double>(j, "input_offset");
  m.class_names = Get<std::vector<std::string>>(j, "class_names");
  for (const json& l : Field(j, "layers")) {
    DenseLayer layer;
    layer.in = Get<int>(l, "in");
    layer.out = Get<int>(l, "out");
    layer.activation = ParseActivation(Get<std::string>(l, "activation"));
    layer.weights = Get<std::vector<double>>(l, "weights");
    layer.bias = Get<std::vector<double>>(l, "bias");
    m.layers.push_back(std::move(layer));
  }
  m.Validate();
  return m;
}

std::string HashHex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fvlrp
