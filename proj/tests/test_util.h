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
#include <vector>

#include "fvlrp/descriptors.h"
#include "fvlrp/gmm.h"
#include "fvlrp/rng.h"
#include "fvlrp/svm.h"

namespace fvlrp::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("fvlrp-" + tag + "-" + std::to_string(counter_++) + "-" +
             std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

inline GmmModel RandomGmm(int K, int D, Rng& rng) {
  GmmModel m;
  m.num_components = K;
  m.dim = D;
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    m.weights.push_back(0.2 + rng.Uniform());
    total += m.weights.back();
  }
  for (double& w : m.weights) w /= total;
  for (int i = 0; i < K * D; ++i) {
    m.means.push_back(rng.Normal());
    m.sigmas.push_back(0.5 + rng.Uniform());
  }
  return m;
}

inline DescriptorSet RandomDescriptors(std::size_t n, int D, int width, int height,
                                       int patch, Rng& rng) {
  DescriptorSet ds;
  ds.image_width = width;
  ds.image_height = height;
  for (std::size_t l = 0; l < n; ++l) {
    LocalDescriptor d;
    for (int r = 0; r < D; ++r) d.values.push_back(rng.Normal());
    d.area = {static_cast<int>(rng.Index(width - patch + 1)),
              static_cast<int>(rng.Index(height - patch + 1)), patch, patch};
    ds.descriptors.push_back(std::move(d));
  }
  return ds;
}

inline SvmModel RandomSvm(int len, int classes, Rng& rng) {
  SvmModel m;
  for (int c = 0; c < classes; ++c) {
    SvmClassifier cls;
    cls.name = "c" + std::to_string(c);
    for (int d = 0; d < len; ++d) cls.w.push_back(rng.Normal());
    cls.b = rng.Normal();
    m.classes.push_back(std::move(cls));
  }
  return m;
}

inline double RelErr(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

}  // namespace fvlrp::testing
