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

#include "fvlrp/imaging_io.h"

namespace fvlrp {

enum class Activation { kRelu, kIdentity };

// x_j = g(z_j), z_j = sum_i w_ij x_i + b_j. weights is out x in, row-major
// (row j holds the incoming weights of unit j).
struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  Activation activation = Activation::kRelu;

  double W(int j, int i) const { return weights[std::size_t(j) * in + i]; }
  bool operator==(const DenseLayer&) const = default;
};

// Fully connected ReLU network over a downscaled grayscale image. The input
// vector is the image box-averaged by `downscale`, minus `input_offset`.
struct NeuralNet {
  int input_width = 32;
  int input_height = 32;
  int downscale = 2;
  double input_offset = 0.5;
  std::vector<std::string> class_names;
  std::vector<DenseLayer> layers;

  int input_size() const { return input_width * input_height; }
  // Throws ValidationError on dimension mismatches or non-finite values.
  void Validate() const;
  bool operator==(const NeuralNet&) const = default;
};

// He-normal weights, zero biases. `hidden` lists hidden widths; the output
// layer (identity activation) has one unit per class.
NeuralNet MakeNet(int input_width, int input_height, int downscale,
                  const std::vector<int>& hidden,
                  const std::vector<std::string>& class_names, std::uint64_t seed,
                  bool use_bias = true);

// Preprocessed input for an image. Throws DimError when the image is not
// input size times downscale.
std::vector<double> NetInput(const NeuralNet& net, const Image& img);

struct ForwardState {
  // activations[0] is the input; activations[k + 1] the output of layer k.
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> preactivations;  // z per layer
};

ForwardState Forward(const NeuralNet& net, std::span<const double> input);
std::vector<double> Predict(const NeuralNet& net, std::span<const double> input);

struct NnTrainOptions {
  int epochs = 50;
  double learning_rate = 0.01;
  int batch_size = 16;
  std::uint64_t seed = 1;
};

struct NnTrainReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_loss;  // full-data loss after each epoch
};

// Mean over examples of sum_c max(0, 1 - y_c f_c(x)). labels[c][i] = +-1.
double MultilabelHingeLoss(const NeuralNet& net,
                           std::span<const std::vector<double>> inputs,
                           const std::vector<std::vector<int>>& labels);

// Mini-batch subgradient descent on the summed per-class hinge losses,
// batches drawn from a seeded shuffle each epoch. Returns the parameters
// with the lowest full-data loss seen (the initial ones included).
NeuralNet NnTrain(NeuralNet net, std::span<const std::vector<double>> inputs,
                  const std::vector<std::vector<int>>& labels,
                  const NnTrainOptions& opts, NnTrainReport* report = nullptr);

// Relevance from the selected output down to the input.
struct LayerRelevance {
  int class_index = 0;
  double score = 0.0;
  // relevance[k] is aligned with ForwardState::activations[k]; the last
  // entry holds f(x) at class_index and zeros elsewhere.
  std::vector<std::vector<double>> relevance;
  // Per layer k: relevance that did not reach layer k's inputs, split into
  // the part attributed to the biases and the part absorbed by the rule
  // itself (epsilon stabilizer, or one-sided units under alpha-beta).
  // sum(relevance[k + 1]) - sum(relevance[k]) = bias_share[k] + rule_share[k].
  std::vector<double> bias_share;
  std::vector<double> rule_share;
};

// R_i = sum_j z_ij / (z_j + eps sign(z_j)) R_j with sign(0) = +1. Throws
// ZeroDenominatorError if eps = 0 and the selected output or a hidden unit
// has z_j = 0.
LayerRelevance LrpEpsilon(const NeuralNet& net, std::span<const double> input,
                          int class_index, double epsilon);

// R_i = sum_j (alpha z_ij+ / z_j+ - beta z_ij- / z_j-) R_j, where the bias
// enters z_j+ or z_j- by sign and a term with a zero denominator is zero.
// Requires alpha - beta = 1 unless enforce_unit_difference is false.
LayerRelevance LrpAlphaBeta(const NeuralNet& net, std::span<const double> input,
                            int class_index, double alpha, double beta,
                            bool enforce_unit_difference = true);

// Input relevance on the source image grid. Each input pixel's relevance is
// spread evenly over its downscale x downscale block, so the sum is kept.
Heatmap NnHeatmap(const NeuralNet& net, const LayerRelevance& rel, int image_width,
                  int image_height);

}  // namespace fvlrp
