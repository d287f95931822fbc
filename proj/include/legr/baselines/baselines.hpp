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
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "legr/archgraph/flops.hpp"
#include "legr/archgraph/graph.hpp"
#include "legr/archgraph/mask.hpp"
#include "legr/error.hpp"
#include "legr/nn/params.hpp"
#include "legr/ranking/ranking.hpp"

namespace legr {

enum class BaselineKind { uniform, local_norm_uniform, global_norm };

inline std::string_view baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::uniform: return "uniform";
    case BaselineKind::local_norm_uniform: return "local_norm_uniform";
    case BaselineKind::global_norm: return "global_norm";
  }
  return "?";
}

inline BaselineKind parse_baseline(std::string_view s) {
  if (s == "uniform") return BaselineKind::uniform;
  if (s == "local_norm_uniform") return BaselineKind::local_norm_uniform;
  if (s == "global_norm") return BaselineKind::global_norm;
  fail(ErrorCategory::invalid_argument, "unknown baseline kind '" + std::string(s) + "'");
}

// Widest prunable channel space; the keep-fraction grid is j / max_channels.
inline std::size_t max_prunable_channels(const NetworkGraph& g) {
  std::size_t w = 0;
  for (const auto& sp : g.spaces()) {
    if (sp.prunable) w = std::max(w, sp.channels);
  }
  return w;
}

// Every prunable space keeps its top max(1, floor(j * C / max_channels))
// coupling groups by summed squared norm.
inline FilterMask uniform_mask_at(const NetworkGraph& g, const ImportanceTable& table, std::size_t j) {
  const std::size_t cmax = max_prunable_channels(g);
  std::vector<std::size_t> drop(g.spaces().size(), 0);
  for (std::size_t s = 0; s < drop.size(); ++s) {
    const auto& sp = g.space(s);
    if (!sp.prunable) continue;
    const std::size_t keep = std::max<std::size_t>(1, j * sp.channels / cmax);
    drop[s] = sp.channels - std::min(keep, sp.channels);
  }
  std::vector<bool> group_keep(g.coupling_groups().size(), true);
  for (auto gid : table.ascending()) {
    const std::size_t s = g.coupling_groups()[gid].space;
    if (drop[s] > 0) {
      group_keep[gid] = false;
      --drop[s];
    }
  }
  return mask_from_groups(g, group_keep);
}

// Largest grid keep-fraction whose mask meets zeta * F0, by bisection
// (FLOPs are monotone in the fraction).
inline FilterMask uniform_prune(const NetworkGraph& g, const FilterNorms& norms, double zeta) {
  check_feasible(g, zeta);
  const auto table = importance(norms, AffinePair::identity(g.prunable_count()), g);
  const double target = zeta * static_cast<double>(full_flops(g));
  auto fits = [&](std::size_t j) { return static_cast<double>(total_flops(g, uniform_mask_at(g, table, j))) <= target; };
  std::size_t lo = 0, hi = max_prunable_channels(g);
  if (!fits(lo)) fail(ErrorCategory::infeasible, "uniform pruning cannot reach the FLOP target");
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (fits(mid)) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return uniform_mask_at(g, table, lo);
}

inline FilterMask uniform_prune(const NetworkGraph& g, const ModelParams& weights, double zeta) {
  return uniform_prune(g, filter_norms(g, weights), zeta);
}

inline FilterMask global_norm_prune(const NetworkGraph& g, const FilterNorms& norms, double zeta) {
  return legr_prune(g, norms, AffinePair::identity(g.prunable_count()), zeta);
}

inline FilterMask global_norm_prune(const NetworkGraph& g, const ModelParams& weights, double zeta) {
  return global_norm_prune(g, filter_norms(g, weights), zeta);
}

// `uniform` and `local_norm_uniform` name the same pruner: one keep fraction
// for every layer, each layer keeping its highest-norm filters.
inline FilterMask baseline_prune(BaselineKind kind, const NetworkGraph& g, const FilterNorms& norms, double zeta) {
  if (kind == BaselineKind::global_norm) return global_norm_prune(g, norms, zeta);
  return uniform_prune(g, norms, zeta);
}

}  // namespace legr
