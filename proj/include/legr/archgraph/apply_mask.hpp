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

#include <cstddef>
#include <utility>
#include <vector>

#include "legr/archgraph/graph.hpp"
#include "legr/archgraph/mask.hpp"
#include "legr/error.hpp"
#include "legr/nn/params.hpp"

namespace legr {

namespace detail {

// Kept channel indices of every space.
inline std::vector<std::vector<std::size_t>> kept_channels(const NetworkGraph& g, const FilterMask& m) {
  std::vector<std::vector<std::size_t>> out(g.spaces().size());
  for (std::size_t s = 0; s < out.size(); ++s) {
    const auto& sp = g.space(s);
    for (std::size_t c = 0; c < sp.channels; ++c) {
      if (!sp.prunable || m.keep[sp.prunable_layers.front()][c]) out[s].push_back(c);
    }
  }
  return out;
}

}  // namespace detail

struct PrunedModel {
  NetworkGraph graph;
  ModelParams params;
};

// Physically removes pruned output channels, together with the matching
// input slices of every consumer.
inline PrunedModel apply_mask(const NetworkGraph& g, const ModelParams& params, const FilterMask& m) {
  validate_mask(g, m);
  validate_params(g, params);
  const auto kept = detail::kept_channels(g, m);

  ArchSpec arch = g.arch();
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (g.node(i).spec.kind == LayerKind::conv) arch.layers[i - 1].out_channels = kept[g.node(i).space].size();
  }
  PrunedModel out{build_graph(arch), ModelParams(g.size())};

  for (std::size_t i = 1; i < g.size(); ++i) {
    const Node& n = g.node(i);
    const LayerParams& src = params[i];
    if (!src.has_params()) continue;
    const auto& kin = kept[g.node(n.preds[0]).space];
    const auto& kout = kept[n.space];
    const auto shapes = expected_param_shapes(out.graph.node(i));
    TensorGrid w(shapes.weights);
    TensorGrid b(shapes.bias);
    switch (n.spec.kind) {
      case LayerKind::conv: {
        const std::size_t kk = n.spec.k * n.spec.k;
        for (std::size_t o = 0; o < kout.size(); ++o) {
          for (std::size_t c = 0; c < kin.size(); ++c) {
            const double* from = src.weights.data() + (kout[o] * n.in_channels + kin[c]) * kk;
            std::copy(from, from + kk, w.data() + (o * kin.size() + c) * kk);
          }
        }
        break;
      }
      case LayerKind::depthwise: {
        const std::size_t kk = n.spec.k * n.spec.k;
        for (std::size_t o = 0; o < kout.size(); ++o) {
          const double* from = src.weights.data() + kout[o] * kk;
          std::copy(from, from + kk, w.data() + o * kk);
        }
        break;
      }
      case LayerKind::dense: {
        const std::size_t plane = n.in_height * n.in_width, in_f = n.in_channels * plane;
        const std::size_t new_in = kin.size() * plane;
        for (std::size_t o = 0; o < n.out_channels; ++o) {
          for (std::size_t c = 0; c < kin.size(); ++c) {
            const double* from = src.weights.data() + o * in_f + kin[c] * plane;
            std::copy(from, from + plane, w.data() + o * new_in + c * plane);
          }
        }
        break;
      }
      case LayerKind::scale_shift:
        for (std::size_t o = 0; o < kout.size(); ++o) w[o] = src.weights[kout[o]];
        break;
      default:
        fail(ErrorCategory::state, "unexpected parameters on '" + n.spec.name + "'");
    }
    const auto& bias_index = n.spec.kind == LayerKind::dense ? std::vector<std::size_t>{} : kout;
    for (std::size_t o = 0; o < b.size(); ++o) b[o] = (*src.bias)[bias_index.empty() ? o : bias_index[o]];
    out.params[i] = LayerParams(std::move(w), std::move(b));
  }
  return out;
}

// Same network, pruned channels silenced in place: every parameter writing a
// pruned channel (filter weights, biases, scale and shift) is zeroed, so the
// channel is identically zero downstream.
inline ModelParams zero_pruned(const NetworkGraph& g, const ModelParams& params, const FilterMask& m) {
  validate_mask(g, m);
  ModelParams out = params;
  for (std::size_t i = 1; i < g.size(); ++i) {
    const Node& n = g.node(i);
    auto& p = out[i];
    if (!p.has_params() || n.spec.kind == LayerKind::dense) continue;
    const auto& sp = g.space(n.space);
    if (!sp.prunable) continue;
    const auto& keep = m.keep[sp.prunable_layers.front()];
    const std::size_t per = p.weights.size() / n.out_channels;
    for (std::size_t c = 0; c < n.out_channels; ++c) {
      if (keep[c]) continue;
      std::fill(p.weights.data() + c * per, p.weights.data() + (c + 1) * per, 0.0);
      if (p.bias) (*p.bias)[c] = 0.0;
    }
  }
  return out;
}

}  // namespace legr
