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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "legr/archgraph/flops.hpp"
#include "legr/archgraph/graph.hpp"
#include "legr/archgraph/mask.hpp"
#include "legr/error.hpp"
#include "legr/nn/params.hpp"

namespace legr {

// Layer-wise scale (alpha) and shift (kappa) applied to squared filter norms,
// one entry per prunable layer.
struct AffinePair {
  std::vector<double> alpha;
  std::vector<double> kappa;

  static AffinePair identity(std::size_t layers) { return {std::vector<double>(layers, 1.0), std::vector<double>(layers, 0.0)}; }

  std::size_t size() const noexcept { return alpha.size(); }

  friend bool operator==(const AffinePair&, const AffinePair&) = default;
};

inline void validate_pair(const NetworkGraph& g, const AffinePair& pair) {
  if (pair.alpha.size() != g.prunable_count() || pair.kappa.size() != g.prunable_count()) {
    fail(ErrorCategory::invalid_argument, "affine pair has " + std::to_string(pair.alpha.size()) + "/" +
                                              std::to_string(pair.kappa.size()) + " entries, graph has " +
                                              std::to_string(g.prunable_count()) + " prunable layers");
  }
  for (std::size_t l = 0; l < pair.size(); ++l) {
    if (!std::isfinite(pair.alpha[l]) || !std::isfinite(pair.kappa[l])) {
      fail(ErrorCategory::invalid_argument, "affine pair entry " + std::to_string(l) + " is not finite");
    }
  }
}

// Squared l2 norm of every filter (output channel) of every prunable layer,
// taken over its whole weight slice.
using FilterNorms = std::vector<std::vector<double>>;

inline FilterNorms filter_norms(const NetworkGraph& g, const ModelParams& params) {
  validate_params(g, params);
  FilterNorms norms;
  for (auto node : g.prunable_layers()) {
    const auto& w = params[node].weights;
    const std::size_t out = w.dim(0), per = w.size() / out;
    std::vector<double> layer(out, 0.0);
    for (std::size_t c = 0; c < out; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < per; ++j) acc += w[c * per + j] * w[c * per + j];
      layer[c] = acc;
    }
    norms.push_back(std::move(layer));
  }
  return norms;
}

// Per coupling group: the summed importance of its member filters.
struct ImportanceTable {
  std::vector<double> filter;  // flattened per-filter importance, for inspection
  std::vector<double> group;   // indexed like NetworkGraph::coupling_groups()
  std::vector<std::size_t> group_layer;    // sort key part 2: first member layer ordinal
  std::vector<std::size_t> group_channel;  // sort key part 3: channel

  // Group ids from least to most important; ties broken by (layer, channel).
  std::vector<std::size_t> ascending() const {
    std::vector<std::size_t> order(group.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (group[a] != group[b]) return group[a] < group[b];
      if (group_layer[a] != group_layer[b]) return group_layer[a] < group_layer[b];
      return group_channel[a] < group_channel[b];
    });
    return order;
  }
};

// I_i = alpha_l * ||W_i||^2 + kappa_l, summed within each coupling group.
inline ImportanceTable importance(const FilterNorms& norms, const AffinePair& pair, const NetworkGraph& g) {
  validate_pair(g, pair);
  if (norms.size() != g.prunable_count()) fail(ErrorCategory::invalid_argument, "norm table does not match graph");
  ImportanceTable t;
  for (std::size_t l = 0; l < norms.size(); ++l) {
    for (double n : norms[l]) t.filter.push_back(pair.alpha[l] * n + pair.kappa[l]);
  }
  for (const auto& grp : g.coupling_groups()) {
    double sum = 0.0;
    for (const auto& ref : grp.members) sum += pair.alpha[ref.layer] * norms[ref.layer].at(ref.channel) + pair.kappa[ref.layer];
    t.group.push_back(sum);
    t.group_layer.push_back(grp.members.front().layer);
    t.group_channel.push_back(grp.channel);
  }
  return t;
}

inline void check_zeta(double zeta) {
  if (!(zeta > 0.0 && zeta <= 1.0)) fail(ErrorCategory::invalid_argument, "zeta must lie in (0, 1]");
}

inline void check_feasible(const NetworkGraph& g, double zeta) {
  check_zeta(zeta);
  const double f0 = static_cast<double>(full_flops(g));
  const double fmin = static_cast<double>(minimal_flops(g));
  if (fmin > zeta * f0) {
    std::ostringstream os;
    os << "FLOP target " << zeta << " is below the minimal achievable ratio " << fmin / f0
       << " (one channel per layer)";
    fail(ErrorCategory::infeasible, os.str());
  }
}

// Greedy removal of coupling groups in a fixed order, against a descending
// list of FLOP targets. Removal stops at the first mask meeting each target;
// groups whose removal would empty their layers are skipped.
class GreedyPruner {
 public:
  GreedyPruner(const NetworkGraph& g, std::vector<std::size_t> order)
      : graph_(&g), model_(g), order_(std::move(order)), group_keep_(g.coupling_groups().size(), true) {
    kept_ = kept_per_space(g, full_mask(g));
    full_ = model_.total(kept_);
    flops_ = full_;
  }

  // Continues removing until flops <= zeta * F0. Later calls must use
  // targets no larger than earlier ones.
  FilterMask prune_to(double zeta) {
    check_feasible(*graph_, zeta);
    const double target = zeta * static_cast<double>(full_);
    while (static_cast<double>(flops_) > target && cursor_ < order_.size()) {
      const std::size_t gid = order_[cursor_++];
      const std::size_t s = graph_->coupling_groups()[gid].space;
      if (kept_[s] <= 1) {
        ++skipped_;
        continue;
      }
      flops_ -= model_.removal_saving(s, kept_);
      --kept_[s];
      group_keep_[gid] = false;
      removed_.push_back(gid);
    }
    if (static_cast<double>(flops_) > target) fail(ErrorCategory::infeasible, "ranking exhausted above target");
    return mask_from_groups(*graph_, group_keep_);
  }

  Flops flops() const noexcept { return flops_; }
  Flops full_flops() const noexcept { return full_; }
  const std::vector<std::size_t>& removed() const noexcept { return removed_; }
  std::size_t skipped() const noexcept { return skipped_; }

 private:
  const NetworkGraph* graph_;
  FlopModel model_;
  std::vector<std::size_t> order_;
  std::vector<bool> group_keep_;
  std::vector<std::size_t> kept_;
  std::vector<std::size_t> removed_;
  Flops full_ = 0, flops_ = 0;
  std::size_t cursor_ = 0;
  std::size_t skipped_ = 0;
};

inline FilterMask legr_prune(const NetworkGraph& g, const FilterNorms& norms, const AffinePair& pair, double zeta) {
  GreedyPruner pruner(g, importance(norms, pair, g).ascending());
  return pruner.prune_to(zeta);
}

inline FilterMask legr_prune(const NetworkGraph& g, const ModelParams& weights, const AffinePair& pair, double zeta) {
  return legr_prune(g, filter_norms(g, weights), pair, zeta);
}

// One mask per target, from a single pass over the ranking, so that
// kept(smaller zeta) is a subset of kept(larger zeta) layer by layer.
inline std::vector<FilterMask> nested_masks(const NetworkGraph& g, const FilterNorms& norms, const AffinePair& pair,
                                            const std::vector<double>& zetas) {
  for (std::size_t i = 0; i < zetas.size(); ++i) {
    check_feasible(g, zetas[i]);
    if (i > 0 && zetas[i] > zetas[i - 1]) fail(ErrorCategory::invalid_argument, "zetas must be sorted descending");
  }
  GreedyPruner pruner(g, importance(norms, pair, g).ascending());
  std::vector<FilterMask> out;
  for (double z : zetas) out.push_back(pruner.prune_to(z));
  return out;
}

inline std::vector<FilterMask> nested_masks(const NetworkGraph& g, const ModelParams& weights, const AffinePair& pair,
                                            const std::vector<double>& zetas) {
  return nested_masks(g, filter_norms(g, weights), pair, zetas);
}

}  // namespace legr
