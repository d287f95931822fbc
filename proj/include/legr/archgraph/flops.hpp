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
#include <cstdint>
#include <vector>

#include "legr/archgraph/graph.hpp"
#include "legr/archgraph/mask.hpp"

namespace legr {

using Flops = std::uint64_t;

// Multiply-accumulate cost of conv, depthwise and dense layers, linear in the
// kept width of the input space and of the output space.
//   conv:      H_out * W_out * k^2 * kept_in * kept_out
//   depthwise: H_out * W_out * k^2 * kept
//   dense:     kept_in * H_in * W_in * out
// Every other layer kind costs nothing.
class FlopModel {
 public:
  explicit FlopModel(const NetworkGraph& g) : graph_(&g) {
    users_.resize(g.spaces().size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& n = g.node(i);
      if (!is_costed(n.spec.kind)) continue;
      const std::size_t in_space = g.node(n.preds[0]).space;
      users_[in_space].push_back(i);
      if (n.space != in_space) users_[n.space].push_back(i);
    }
  }

  static bool is_costed(LayerKind k) {
    return k == LayerKind::conv || k == LayerKind::depthwise || k == LayerKind::dense;
  }

  // u_l: cost per unit of kept_in * kept_out (conv), kept (depthwise) or
  // kept_in (dense).
  Flops coefficient(std::size_t node) const {
    const auto& n = graph_->node(node);
    switch (n.spec.kind) {
      case LayerKind::conv:
      case LayerKind::depthwise:
        return static_cast<Flops>(n.out_height * n.out_width * n.spec.k * n.spec.k);
      case LayerKind::dense:
        return static_cast<Flops>(n.in_height * n.in_width * n.out_channels);
      default:
        return 0;
    }
  }

  Flops layer_flops(std::size_t node, const std::vector<std::size_t>& kept) const {
    const auto& n = graph_->node(node);
    if (!is_costed(n.spec.kind)) return 0;
    const std::size_t kin = kept[graph_->node(n.preds[0]).space];
    switch (n.spec.kind) {
      case LayerKind::conv: return coefficient(node) * kin * kept[n.space];
      case LayerKind::depthwise: return coefficient(node) * kin;
      case LayerKind::dense: return coefficient(node) * kin;
      default: return 0;
    }
  }

  Flops total(const std::vector<std::size_t>& kept) const {
    Flops sum = 0;
    for (std::size_t i = 0; i < graph_->size(); ++i) sum += layer_flops(i, kept);
    return sum;
  }

  // Costed layers whose cost depends on the width of space `s`.
  const std::vector<std::size_t>& users(std::size_t s) const { return users_.at(s); }

  // Change in total cost when space `s` shrinks by one channel.
  Flops removal_saving(std::size_t s, std::vector<std::size_t>& kept) const {
    Flops before = 0, after = 0;
    for (auto node : users_[s]) before += layer_flops(node, kept);
    --kept[s];
    for (auto node : users_[s]) after += layer_flops(node, kept);
    ++kept[s];
    return before - after;
  }

  const NetworkGraph& graph() const noexcept { return *graph_; }

 private:
  const NetworkGraph* graph_;
  std::vector<std::vector<std::size_t>> users_;
};

inline Flops total_flops(const NetworkGraph& g, const FilterMask& m) {
  validate_mask(g, m);
  return FlopModel(g).total(kept_per_space(g, m));
}

inline Flops full_flops(const NetworkGraph& g) { return total_flops(g, full_mask(g)); }

// Cost of the narrowest legal network: one channel in every prunable space.
inline Flops minimal_flops(const NetworkGraph& g) {
  auto kept = kept_per_space(g, full_mask(g));
  for (std::size_t s = 0; s < kept.size(); ++s) {
    if (g.space(s).prunable) kept[s] = 1;
  }
  return FlopModel(g).total(kept);
}

struct LayerFlopRow {
  std::string name;
  LayerKind kind;
  std::size_t kept_channels;
  std::size_t total_channels;
  Flops flops;
};

inline std::vector<LayerFlopRow> flop_table(const NetworkGraph& g, const FilterMask& m) {
  validate_mask(g, m);
  FlopModel model(g);
  const auto kept = kept_per_space(g, m);
  std::vector<LayerFlopRow> rows;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& n = g.node(i);
    if (!FlopModel::is_costed(n.spec.kind)) continue;
    rows.push_back({n.spec.name, n.spec.kind, kept[n.space], n.out_channels, model.layer_flops(i, kept)});
  }
  return rows;
}

}  // namespace legr
