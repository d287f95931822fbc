// Copyright 2026 The LeGR Toolkit Authors.
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

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "legr/archgraph/graph.hpp"
#include "legr/error.hpp"
#include "legr/rng.hpp"
#include "legr/tensor.hpp"

namespace legr {

// Trainable state of one node. Layout of `weights`:
//   conv        [out, in, k, k]
//   depthwise   [channels, 1, k, k]
//   dense       [out, in_features]   (in_features = C*H*W of the input, CHW order)
//   scale_shift [channels]           (the per-channel scale; `bias` holds the shift)
// Nodes without parameters have an empty `weights`.
struct LayerParams {
  TensorGrid weights;
  std::optional<TensorGrid> bias;
  TensorGrid weight_grad;
  TensorGrid bias_grad;
  TensorGrid weight_momentum;
  TensorGrid bias_momentum;

  LayerParams() = default;
  LayerParams(TensorGrid w, std::optional<TensorGrid> b) : weights(std::move(w)), bias(std::move(b)) { reset_state(); }

  bool has_params() const noexcept { return !weights.empty(); }

  // Zeroes gradients and momentum buffers, shaped like the parameters.
  void reset_state() {
    if (!has_params()) return;
    weight_grad = TensorGrid(weights.shape());
    weight_momentum = TensorGrid(weights.shape());
    if (bias) {
      bias_grad = TensorGrid(bias->shape());
      bias_momentum = TensorGrid(bias->shape());
    } else {
      bias_grad = bias_momentum = TensorGrid();
    }
  }

  void zero_grad() {
    weight_grad.fill(0.0);
    bias_grad.fill(0.0);
  }
};

using ModelParams = std::vector<LayerParams>;

struct ParamShapes {
  Shape weights;
  Shape bias;  // empty when the node has no parameters
};

inline ParamShapes expected_param_shapes(const Node& n) {
  switch (n.spec.kind) {
    case LayerKind::conv:
      return {{n.out_channels, n.in_channels, n.spec.k, n.spec.k}, {n.out_channels}};
    case LayerKind::depthwise:
      return {{n.out_channels, 1, n.spec.k, n.spec.k}, {n.out_channels}};
    case LayerKind::dense:
      return {{n.out_channels, n.in_channels * n.in_height * n.in_width}, {n.out_channels}};
    case LayerKind::scale_shift:
      return {{n.out_channels}, {n.out_channels}};
    default:
      return {};
  }
}

inline void validate_params(const NetworkGraph& g, const ModelParams& params) {
  if (params.size() != g.size()) {
    fail(ErrorCategory::shape_mismatch, "parameter list has " + std::to_string(params.size()) + " entries, graph has " +
                                            std::to_string(g.size()) + " nodes");
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto expect = expected_param_shapes(g.node(i));
    const auto& p = params[i];
    const Shape got_w = p.has_params() ? p.weights.shape() : Shape{};
    const Shape got_b = p.bias ? p.bias->shape() : Shape{};
    if (got_w != expect.weights || got_b != expect.bias) {
      fail(ErrorCategory::shape_mismatch, "layer '" + g.node(i).spec.name + "': expected weights " +
                                              shape_string(expect.weights) + " bias " + shape_string(expect.bias) +
                                              ", got " + shape_string(got_w) + " / " + shape_string(got_b));
    }
  }
}

// He-normal weights, zero biases, unit scales.
inline ModelParams init_params(const NetworkGraph& g, Rng& rng) {
  ModelParams params(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& n = g.node(i);
    const auto shapes = expected_param_shapes(n);
    if (shapes.weights.empty()) continue;
    TensorGrid w(shapes.weights);
    if (n.spec.kind == LayerKind::scale_shift) {
      w.fill(1.0);
    } else {
      const double fan_in = static_cast<double>(w.size() / shapes.weights[0]);
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
      for (auto& v : w.values()) v = dist(rng);
    }
    params[i] = LayerParams(std::move(w), TensorGrid(shapes.bias));
  }
  return params;
}

inline std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  for (const auto& p : params) {
    if (!p.has_params()) continue;
    n += p.weights.size() + (p.bias ? p.bias->size() : 0);
  }
  return n;
}

}  // namespace legr
