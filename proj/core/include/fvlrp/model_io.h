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
#include <string>
#include <string_view>

#include "fvlrp/descriptors.h"
#include "fvlrp/gmm.h"
#include "fvlrp/imaging_io.h"
#include "fvlrp/lrp_nn.h"
#include "fvlrp/svm.h"

namespace fvlrp {

// Model files are JSON objects with a common envelope:
//   {"format": "fvlrp-model", "version": 1, "kind": ..., "config_hash": ...}
// followed by kind-specific fields (see docs/formats.md). Reals are written
// in shortest round-trip form, so load(save(m)) == m exactly.
inline constexpr int kModelSchemaVersion = 1;

struct ModelHeader {
  std::string kind;  // pca | gmm | svm | nn
  int version = 0;
  std::string config_hash;
};

// Throws ParseError for malformed text or a missing envelope field and
// VersionError for a different schema version.
ModelHeader ReadModelHeader(const std::string& text);

std::string SerializeModel(const PcaModel& m, const std::string& config_hash = "");
std::string SerializeModel(const GmmModel& m, const std::string& config_hash = "");
std::string SerializeModel(const SvmModel& m, const std::string& config_hash = "");
std::string SerializeModel(const NeuralNet& m, const std::string& config_hash = "");

// Throw ParseError for a missing field or the wrong kind, VersionError for
// a schema mismatch, ValidationError for inconsistent parameters.
PcaModel DeserializePca(const std::string& text, ModelHeader* header = nullptr);
GmmModel DeserializeGmm(const std::string& text, ModelHeader* header = nullptr);
SvmModel DeserializeSvm(const std::string& text, ModelHeader* header = nullptr);
NeuralNet DeserializeNet(const std::string& text, ModelHeader* header = nullptr);

template <typename Model>
void SaveModel(const Model& m, const std::filesystem::path& path,
               const std::string& config_hash = "") {
  WriteFileBytes(path, SerializeModel(m, config_hash));
}

// 64-bit FNV-1a of `data` as 16 lowercase hex digits.
std::string HashHex(std::string_view data);

}  // namespace fvlrp
