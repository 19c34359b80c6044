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


#include "fvlrp/lrp_nn.h"

#include <cmath>
#include <limits>

#include "fvlrp/errors.h"
#include "fvlrp/parallel.h"
#include "fvlrp/rng.h"

namespace fvlrp {
namespace {

void CheckClass(const NeuralNet& net, int class_index) {
  if (class_index < 0 || class_index >= static_cast<int>(net.class_names.size())) {
    throw RangeError("class index " + std::to_string(class_index) + " out of range");
  }
}

// Parameter-shaped accumulator for gradients.
struct Gradient {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  explicit Gradient(const NeuralNet& net) {
    for (const auto& layer : net.layers) {
      w.emplace_back(layer.weights.size(), 0.0);
      b.emplace_back(layer.bias.size(), 0.0);
    }
  }
};

// Adds the subgradient of sum_c max(0, 1 - y_c f_c) at one example.
void AccumulateGradient(const NeuralNet& net, std::span<const double> input,
                        const std::vector<std::vector<int>>& labels, std::size_t example,
                        Gradient& g) {
  const ForwardState st = Forward(net, input);
  const std::size_t num_layers = net.layers.size();
  const auto& scores = st.activations.back();
  std::vector<double> delta(scores.size(), 0.0);
  bool any = false;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    const double y = labels[c][example];
    if (y * scores[c] < 1.0) {
      delta[c] = -y;
      any = true;
    }
  }
  if (!any) return;
  for (std::size_t k = num_layers; k-- > 0;) {
    const DenseLayer& layer = net.layers[k];
    const auto& z = st.preactivations[k];
    if (layer.activation == Activation::kRelu) {
      for (int j = 0; j < layer.out; ++j) {
        if (!(z[j] > 0.0)) delta[j] = 0.0;
      }
    }
    const auto& a = st.activations[k];
    for (int j = 0; j < layer.out; ++j) {
      if (delta[j] == 0.0) continue;
      double* gw = g.w[k].data() + std::size_t(j) * layer.in;
      for (int i = 0; i < layer.in; ++i) gw[i] += delta[j] * a[i];
      if (!layer.bias.empty()) g.b[k][j] += delta[j];
    }
    if (k == 0) break;
    std::vector<double> prev(layer.in, 0.0);
    for (int j = 0; j < layer.out; ++j) {
      if (delta[j] == 0.0) continue;
      const double* w = layer.weights.data() + std::size_t(j) * layer.in;
      for (int i = 0; i < layer.in; ++i) prev[i] += delta[j] * w[i];
    }
    delta = std::move(prev);
  }
}

void CheckLabels(const NeuralNet& net, std::size_t n,
                 const std::vector<std::vector<int>>& labels) {
  if (labels.size() != net.class_names.size()) {
    throw DimError("label rows do not match the number of classes");
  }
  for (const auto& row : labels) {
    if (row.size() != n) throw DimError("label row length does not match inputs");
  }
}

}  // namespace

void NeuralNet::Validate() const {
  if (layers.empty()) throw ValidationError("network has no layers");
  if (input_width < 1 || input_height < 1 || downscale < 1) {
    throw ValidationError("invalid network input geometry");
  }
  if (layers.front().in != input_size()) {
    throw ValidationError("first layer width does not match the input size");
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const DenseLayer& l = layers[k];
    if (l.in < 1 || l.out < 1) throw ValidationError("empty layer");
    if (k > 0 && layers[k - 1].out != l.in) {
      throw ValidationError("layer " + std::to_string(k) + " input does not match");
    }
    if (l.weights.size() != std::size_t(l.in) * l.out) {
      throw ValidationError("weight matrix size mismatch");
    }
    if (!l.bias.empty() && static_cast<int>(l.bias.size()) != l.out) {
      throw ValidationError("bias size mismatch");
    }
    for (double v : l.weights) {
      if (!std::isfinite(v)) throw ValidationError("non-finite weight");
    }
    for (double v : l.bias) {
      if (!std::isfinite(v)) throw ValidationError("non-finite bias");
    }
  }
  if (layers.back().out != static_cast<int>(class_names.size())) {
    throw ValidationError("output width does not match the number of classes");
  }
}

NeuralNet MakeNet(int input_width, int input_height, int downscale,
                  const std::vector<int>& hidden,
                  const std::vector<std::string>& class_names, std::uint64_t seed,
                  bool use_bias) {
  NeuralNet net;
  net.input_width = input_width;
  net.input_height = input_height;
  net.downscale = downscale;
  net.class_names = class_names;
  Rng rng(seed);
  std::vector<int> widths = {input_width * input_height};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(static_cast<int>(class_names.size()));
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    DenseLayer layer;
    layer.in = widths[k];
    layer.out = widths[k + 1];
    layer.activation = k + 2 == widths.size() ? Activation::kIdentity : Activation::kRelu;
    const double scale = std::sqrt(2.0 / layer.in);
    layer.weights.resize(std::size_t(layer.in) * layer.out);
    for (double& w : layer.weights) w = scale * rng.Normal();
    if (use_bias) layer.bias.assign(layer.out, 0.0);
    net.layers.push_back(std::move(layer));
  }
  net.Validate();
  return net;
}

std::vector<double> NetInput(const NeuralNet& net, const Image& img) {
  const int f = net.downscale;
  if (img.width != net.input_width * f || img.height != net.input_height * f) {
    throw DimError("image is " + std::to_string(img.width) + "x" +
                   std::to_string(img.height) + ", network expects " +
                   std::to_string(net.input_width * f) + "x" +
                   std::to_string(net.input_height * f));
  }
  const Image gray = ToGray(img);
  std::vector<double> out(net.input_size());
  const double area = static_cast<double>(f) * f;
  for (int y = 0; y < net.input_height; ++y) {
    for (int x = 0; x < net.input_width; ++x) {
      double s = 0.0;
      for (int dy = 0; dy < f; ++dy) {
        for (int dx = 0; dx < f; ++dx) s += gray.at(x * f + dx, y * f + dy);
      }
      out[std::size_t(y) * net.input_width + x] = s / area - net.input_offset;
    }
  }
  return out;
}

ForwardState Forward(const NeuralNet& net, std::span<const double> input) {
  if (net.layers.empty()) throw ValidationError("network has no layers");
  if (static_cast<int>(input.size()) != net.layers.front().in) {
    throw DimError("input length " + std::to_string(input.size()) +
                   " does not match the network");
  }
  ForwardState st;
  st.activations.emplace_back(input.begin(), input.end());
  for (const DenseLayer& layer : net.layers) {
    const auto& a = st.activations.back();
    std::vector<double> z(layer.out);
    for (int j = 0; j < layer.out; ++j) {
      const double* w = layer.weights.data() + std::size_t(j) * layer.in;
      double s = layer.bias.empty() ? 0.0 : layer.bias[j];
      for (int i = 0; i < layer.in; ++i) s += w[i] * a[i];
      z[j] = s;
    }
    std::vector<double> x = z;
    if (layer.activation == Activation::kRelu) {
      for (double& v : x) v = v > 0.0 ? v : 0.0;
    }
    st.preactivations.push_back(std::move(z));
    st.activations.push_back(std::move(x));
  }
  return st;
}

std::vector<double> Predict(const NeuralNet& net, std::span<const double> input) {
  return Forward(net, input).activations.back();
}

double MultilabelHingeLoss(const NeuralNet& net,
                           std::span<const std::vector<double>> inputs,
                           const std::vector<std::vector<int>>& labels) {
  CheckLabels(net, inputs.size(), labels);
  if (inputs.empty()) throw EmptyInputError("no training inputs");
  std::vector<double> per(inputs.size());
  ParallelFor(inputs.size(), [&](std::size_t i) {
    const auto f = Predict(net, inputs[i]);
    double s = 0.0;
    for (std::size_t c = 0; c < f.size(); ++c) {
      s += std::max(0.0, 1.0 - labels[c][i] * f[c]);
    }
    per[i] = s;
  });
  double total = 0.0;
  for (double v : per) total += v;
  return total / static_cast<double>(inputs.size());
}

NeuralNet NnTrain(NeuralNet net, std::span<const std::vector<double>> inputs,
                  const std::vector<std::vector<int>>& labels,
                  const NnTrainOptions& opts, NnTrainReport* report) {
  net.Validate();
  const std::size_t n = inputs.size();
  CheckLabels(net, n, labels);
  for (const auto& x : inputs) {
    if (static_cast<int>(x.size()) != net.input_size()) {
      throw DimError("training input does not match the network input size");
    }
  }
  for (std::size_t c = 0; c < labels.size(); ++c) {
    bool pos = false;
    bool neg = false;
    for (int y : labels[c]) {
      if (y == 1) {
        pos = true;
      } else if (y == -1) {
        neg = true;
      } else {
        throw TrainError("labels must be +1 or -1");
      }
    }
    if (!pos || !neg) {
      throw TrainError("class '" + net.class_names[c] +
                       "' needs positive and negative examples");
    }
  }
  if (opts.epochs < 0 || opts.batch_size < 1 || !(opts.learning_rate >= 0.0)) {
    throw ValidationError("invalid training options");
  }

  NnTrainReport rep;
  rep.initial_loss = MultilabelHingeLoss(net, inputs, labels);
  NeuralNet best = net;
  double best_loss = rep.initial_loss;
  Rng rng(opts.seed);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto order = rng.Permutation(n);
    for (std::size_t start = 0; start < n; start += opts.batch_size) {
      const std::size_t end = std::min(n, start + std::size_t(opts.batch_size));
      std::vector<Gradient> parts(end - start, Gradient(net));
      ParallelFor(end - start, [&](std::size_t t) {
        const std::size_t i = order[start + t];
        AccumulateGradient(net, inputs[i], labels, i, parts[t]);
      });
      const double step = opts.learning_rate / static_cast<double>(end - start);
      for (std::size_t k = 0; k < net.layers.size(); ++k) {
        DenseLayer& layer = net.layers[k];
        for (const Gradient& g : parts) {
          for (std::size_t q = 0; q < layer.weights.size(); ++q) {
            layer.weights[q] -= step * g.w[k][q];
          }
          for (std::size_t q = 0; q < layer.bias.size(); ++q) {
            layer.bias[q] -= step * g.b[k][q];
          }
        }
      }
    }
    const double loss = MultilabelHingeLoss(net, inputs, labels);
    rep.epoch_loss.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best = net;
    }
  }
  rep.final_loss = best_loss;
  if (report != nullptr) *report = std::move(rep);
  return best;
}

LayerRelevance LrpEpsilon(const NeuralNet& net, std::span<const double> input,
                          int class_index, double epsilon) {
  CheckClass(net, class_index);
  if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be non-negative");
  const ForwardState st = Forward(net, input);
  const std::size_t num_layers = net.layers.size();
  LayerRelevance out;
  out.class_index = class_index;
  out.score = st.activations.back()[class_index];
  out.relevance.resize(num_layers + 1);
  out.bias_share.assign(num_layers, 0.0);
  out.rule_share.assign(num_layers, 0.0);
  out.relevance[num_layers].assign(st.activations.back().size(), 0.0);
  out.relevance[num_layers][class_index] = out.score;

  for (std::size_t k = num_layers; k-- > 0;) {
    const DenseLayer& layer = net.layers[k];
    const auto& a = st.activations[k];
    const auto& z = st.preactivations[k];
    const auto& upper = out.relevance[k + 1];
    auto& lower = out.relevance[k];
    lower.assign(layer.in, 0.0);
    const bool top = k + 1 == num_layers;
    for (int j = 0; j < layer.out; ++j) {
      const double rj = upper[j];
      const double sign = z[j] >= 0.0 ? 1.0 : -1.0;
      const double denom = z[j] + epsilon * sign;
      // Non-selected outputs never carry relevance; every other unit is on
      // the propagation path, even when its share happens to be zero.
      if (denom == 0.0 && (!top || j == class_index)) {
        throw ZeroDenominatorError("unit " + std::to_string(j) + " of layer " +
                                   std::to_string(k) + " has z = 0 with epsilon = 0");
      }
      if (rj == 0.0) continue;
      const double ratio = rj / denom;
      const double* w = layer.weights.data() + std::size_t(j) * layer.in;
      for (int i = 0; i < layer.in; ++i) lower[i] += a[i] * w[i] * ratio;
      if (!layer.bias.empty()) out.bias_share[k] += layer.bias[j] * ratio;
      out.rule_share[k] += epsilon * sign * ratio;
    }
  }
  return out;
}

LayerRelevance LrpAlphaBeta(const NeuralNet& net, std::span<const double> input,
                            int class_index, double alpha, double beta,
                            bool enforce_unit_difference) {
  CheckClass(net, class_index);
  if (enforce_unit_difference && std::abs(alpha - beta - 1.0) > 1e-12) {
    throw ValidationError("alpha - beta must equal 1");
  }
  const ForwardState st = Forward(net, input);
  const std::size_t num_layers = net.layers.size();
  LayerRelevance out;
  out.class_index = class_index;
  out.score = st.activations.back()[class_index];
  out.relevance.resize(num_layers + 1);
  out.bias_share.assign(num_layers, 0.0);
  out.rule_share.assign(num_layers, 0.0);
  out.relevance[num_layers].assign(st.activations.back().size(), 0.0);
  out.relevance[num_layers][class_index] = out.score;

  for (std::size_t k = num_layers; k-- > 0;) {
    const DenseLayer& layer = net.layers[k];
    const auto& a = st.activations[k];
    const auto& upper = out.relevance[k + 1];
    auto& lower = out.relevance[k];
    lower.assign(layer.in, 0.0);
    for (int j = 0; j < layer.out; ++j) {
      const double rj = upper[j];
      if (rj == 0.0) continue;
      const double* w = layer.weights.data() + std::size_t(j) * layer.in;
      const double b = layer.bias.empty() ? 0.0 : layer.bias[j];
      const double b_pos = b > 0.0 ? b : 0.0;
      const double b_neg = b < 0.0 ? b : 0.0;
      double z_pos = b_pos;
      double z_neg = b_neg;
      for (int i = 0; i < layer.in; ++i) {
        const double zij = a[i] * w[i];
        if (zij > 0.0) {
          z_pos += zij;
        } else {
          z_neg += zij;
        }
      }
      const double cp = z_pos != 0.0 ? alpha * rj / z_pos : 0.0;
      const double cn = z_neg != 0.0 ? beta * rj / z_neg : 0.0;
      for (int i = 0; i < layer.in; ++i) {
        const double zij = a[i] * w[i];
        lower[i] += zij > 0.0 ? zij * cp : -zij * cn;
      }
      out.bias_share[k] += b_pos * cp - b_neg * cn;
      const double kept = (z_pos != 0.0 ? alpha : 0.0) - (z_neg != 0.0 ? beta : 0.0);
      out.rule_share[k] += (1.0 - kept) * rj;
    }
  }
  return out;
}

Heatmap NnHeatmap(const NeuralNet& net, const LayerRelevance& rel, int image_width,
                  int image_height) {
  const int f = net.downscale;
  if (image_width != net.input_width * f || image_height != net.input_height * f) {
    throw DimError("heatmap size does not match the network input geometry");
  }
  if (rel.relevance.empty() ||
      static_cast<int>(rel.relevance.front().size()) != net.input_size()) {
    throw DimError("input relevance does not match the network");
  }
  const auto& r = rel.relevance.front();
  Heatmap h(image_width, image_height);
  const double area = static_cast<double>(f) * f;
  for (int y = 0; y < image_height; ++y) {
    for (int x = 0; x < image_width; ++x) {
      h.at(x, y) = r[std::size_t(y / f) * net.input_width + x / f] / area;
    }
  }
  return h;
}

}  // namespace fvlrp
