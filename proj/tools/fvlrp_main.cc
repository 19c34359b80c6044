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


// Command line driver for the fvlrp pipeline stages.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fvlrp/errors.h"
#include "fvlrp/parallel.h"
#include "fvlrp/pipeline.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitDependency = 2;
constexpr int kExitFailure = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::optional<std::string> variant;
  std::optional<double> epsilon;
  std::string class_name;
  std::optional<std::string> out;
  std::string image;
  std::string model = "fv";
};

void AddFlags(CLI::App& app, Flags& f) {
  app.add_option("--config", f.config, "JSON config file");
  app.add_option("--seed", f.seed, "global seed");
  app.add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--variant", f.variant, "R2 variant")
      ->check(CLI::IsMember({"plain", "eps", "abs"}));
  app.add_option("--epsilon", f.epsilon, "epsilon of the eps variant");
  app.add_option("--class", f.class_name, "class to explain");
  app.add_option("--out", f.out, "work directory");
  app.add_option("--image", f.image, "image id to explain, e.g. test/0003");
  app.add_option("--model", f.model, "model to predict or explain with")
      ->check(CLI::IsMember({"fv", "nn"}));
}

fvlrp::PipelineConfig BuildConfig(const Flags& f) {
  fvlrp::PipelineConfig c;
  if (!f.config.empty()) c = fvlrp::LoadConfig(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.variant) c.variant = fvlrp::ParseVariant(*f.variant);
  if (f.epsilon) c.epsilon = *f.epsilon;
  if (f.out) c.work_dir = *f.out;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fisher vector and neural network relevance pipeline"};
  app.require_subcommand(1);
  Flags flags;
  AddFlags(app, flags);
  for (fvlrp::Stage s : fvlrp::AllStages()) {
    app.add_subcommand(fvlrp::StageName(s))->fallthrough();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const fvlrp::Stage stage = fvlrp::ParseStage(app.get_subcommands().front()->get_name());
    fvlrp::SetThreadCount(flags.threads);
    const fvlrp::PipelineConfig config = BuildConfig(flags);
    fvlrp::StageOptions opts;
    opts.class_name = flags.class_name;
    opts.image_id = flags.image;
    opts.model = flags.model;
    fvlrp::RunStage(stage, config, opts, std::cout);
  } catch (const fvlrp::UsageError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const fvlrp::DependencyError& e) {
    std::cerr << e.what() << "\n";
    return kExitDependency;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}
