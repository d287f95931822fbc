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
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "legr/error.hpp"
#include "legr/rng.hpp"

namespace legr {

enum class LayerKind { input, conv, depthwise, dense, relu, maxpool, gap, add, scale_shift, softmax_ce };

inline std::string_view kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::input: return "input";
    case LayerKind::conv: return "conv";
    case LayerKind::depthwise: return "depthwise";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::gap: return "gap";
    case LayerKind::add: return "add";
    case LayerKind::scale_shift: return "scale_shift";
    case LayerKind::softmax_ce: return "softmax_ce";
  }
  return "?";
}

inline std::optional<LayerKind> parse_kind(std::string_view s) {
  for (auto k : {LayerKind::input, LayerKind::conv, LayerKind::depthwise, LayerKind::dense, LayerKind::relu,
                 LayerKind::maxpool, LayerKind::gap, LayerKind::add, LayerKind::scale_shift, LayerKind::softmax_ce}) {
    if (kind_name(k) == s) return k;
  }
  return std::nullopt;
}

// One entry of an architecture description. `out_channels` is only read for
// conv and dense layers; every other kind derives its width from its inputs.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::relu;
  std::size_t k = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t out_channels = 0;
  std::vector<std::string> inputs;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// The graph input is implicit and always named "input".
struct ArchSpec {
  std::string name = "net";
  std::size_t in_channels = 1;
  std::size_t in_height = 1;
  std::size_t in_width = 1;
  std::vector<LayerSpec> layers;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

inline constexpr std::string_view kInputName = "input";

struct Node {
  LayerSpec spec;
  std::vector<std::size_t> preds;
  std::size_t in_channels = 0, in_height = 0, in_width = 0;
  std::size_t out_channels = 0, out_height = 0, out_width = 0;
  std::size_t space = 0;  // channel space of the output
};

struct ChannelRef {
  std::size_t layer;    // prunable-layer ordinal
  std::size_t channel;

  friend bool operator==(const ChannelRef&, const ChannelRef&) = default;
  friend auto operator<=>(const ChannelRef&, const ChannelRef&) = default;
};

// Channels that must be kept or pruned jointly: channel `channel` of every
// prunable layer writing into channel space `space`.
struct CouplingGroup {
  std::size_t space = 0;
  std::size_t channel = 0;
  std::vector<ChannelRef> members;
};

// A set of nodes whose output channels are tied one-to-one, because they pass
// channels through (relu, pooling, depthwise, scale_shift) or sum them (add).
struct ChannelSpace {
  std::size_t channels = 0;
  bool prunable = false;
  std::vector<std::size_t> nodes;            // all nodes producing this space
  std::vector<std::size_t> prunable_layers;  // ordinals of conv/depthwise members
};

class NetworkGraph {
 public:
  const ArchSpec& arch() const noexcept { return arch_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t loss_node() const noexcept { return nodes_.size() - 1; }

  const std::vector<ChannelSpace>& spaces() const noexcept { return spaces_; }
  const ChannelSpace& space(std::size_t s) const { return spaces_.at(s); }

  // Conv and depthwise nodes whose output channels may be pruned, in
  // topological order. Their position in this list is the "layer ordinal"
  // used by masks and affine pairs.
  const std::vector<std::size_t>& prunable_layers() const noexcept { return prunable_; }
  std::size_t prunable_count() const noexcept { return prunable_.size(); }
  std::optional<std::size_t> prunable_ordinal(std::size_t node) const {
    auto it = std::find(prunable_.begin(), prunable_.end(), node);
    if (it == prunable_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - prunable_.begin());
  }
  const Node& prunable_node(std::size_t ordinal) const { return nodes_.at(prunable_.at(ordinal)); }

  // Groups ordered by (first member layer ordinal, channel).
  const std::vector<CouplingGroup>& coupling_groups() const noexcept { return groups_; }

  // Index of the group holding (layer ordinal, channel).
  std::size_t group_of(std::size_t ordinal, std::size_t channel) const {
    const auto& sp = nodes_.at(prunable_.at(ordinal)).space;
    return group_base_.at(sp) + channel;
  }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].spec.name == name) return i;
    }
    return std::nullopt;
  }

  std::size_t num_classes() const { return nodes_[nodes_[loss_node()].preds[0]].out_channels; }

  std::string fingerprint() const {
    std::ostringstream os;
    os << arch_.in_channels << 'x' << arch_.in_height << 'x' << arch_.in_width << ';';
    for (const auto& n : nodes_) {
      os << n.spec.name << ':' << kind_name(n.spec.kind) << ':' << n.spec.k << ':' << n.spec.stride << ':'
         << n.spec.pad << ':' << n.in_channels << ':' << n.out_channels << ':' << n.out_height << ':' << n.out_width;
      for (auto p : n.preds) os << ',' << p;
      os << ';';
    }
    std::ostringstream hex;
    hex << std::hex << fnv1a64(os.str());
    return hex.str();
  }

 private:
  friend NetworkGraph build_graph(const ArchSpec& spec);

  ArchSpec arch_;
  std::vector<Node> nodes_;
  std::vector<ChannelSpace> spaces_;
  std::vector<std::size_t> prunable_;
  std::vector<CouplingGroup> groups_;
  std::vector<std::size_t> group_base_;
};

namespace detail {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

inline std::string where(const LayerSpec& l) { return "layer '" + l.name + "' (" + std::string(kind_name(l.kind)) + ")"; }

}  // namespace detail

// Validates an architecture description and derives shapes, channel spaces
// and coupling groups. Layers must be listed in topological order and the
// last layer must be the single softmax_ce loss.
inline NetworkGraph build_graph(const ArchSpec& spec) {
  using detail::where;
  NetworkGraph g;
  g.arch_ = spec;
  if (spec.in_channels == 0 || spec.in_height == 0 || spec.in_width == 0) {
    fail(ErrorCategory::invalid_graph, "input extents must be positive");
  }
  if (spec.layers.empty()) fail(ErrorCategory::invalid_graph, "architecture has no layers");

  Node input;
  input.spec.name = std::string(kInputName);
  input.spec.kind = LayerKind::input;
  input.spec.out_channels = spec.in_channels;
  input.out_channels = spec.in_channels;
  input.out_height = spec.in_height;
  input.out_width = spec.in_width;
  g.nodes_.push_back(input);

  std::map<std::string, std::size_t, std::less<>> index{{std::string(kInputName), 0}};
  std::size_t loss_count = 0;
  for (const auto& l : spec.layers) {
    if (l.name.empty()) fail(ErrorCategory::invalid_graph, "layer with empty name");
    if (index.count(l.name)) fail(ErrorCategory::invalid_graph, "duplicate layer name '" + l.name + "'");
    if (l.kind == LayerKind::input) fail(ErrorCategory::invalid_graph, where(l) + ": only the implicit input may have kind input");
    Node n;
    n.spec = l;
    for (const auto& in : l.inputs) {
      auto it = index.find(in);
      if (it == index.end()) {
        fail(ErrorCategory::invalid_graph, where(l) + ": unknown or later-defined input '" + in + "'");
      }
      n.preds.push_back(it->second);
    }
    const std::size_t arity = n.preds.size();
    if (l.kind == LayerKind::add ? arity < 2 : arity != 1) {
      fail(ErrorCategory::invalid_graph, where(l) + ": wrong number of inputs (" + std::to_string(arity) + ")");
    }
    const Node& p = g.nodes_[n.preds[0]];
    if (p.spec.kind == LayerKind::softmax_ce) fail(ErrorCategory::invalid_graph, where(l) + ": consumes the loss");
    n.in_channels = p.out_channels;
    n.in_height = p.out_height;
    n.in_width = p.out_width;
    auto conv_extent = [&](std::size_t in) -> std::size_t {
      if (l.k == 0 || l.stride == 0) fail(ErrorCategory::invalid_graph, where(l) + ": k and stride must be >= 1");
      if (in + 2 * l.pad < l.k) fail(ErrorCategory::invalid_graph, where(l) + ": kernel larger than padded input");
      return (in + 2 * l.pad - l.k) / l.stride + 1;
    };
    switch (l.kind) {
      case LayerKind::conv:
        if (l.out_channels == 0) fail(ErrorCategory::invalid_graph, where(l) + ": out_channels must be >= 1");
        n.out_channels = l.out_channels;
        n.out_height = conv_extent(n.in_height);
        n.out_width = conv_extent(n.in_width);
        break;
      case LayerKind::depthwise:
        n.out_channels = n.in_channels;
        n.out_height = conv_extent(n.in_height);
        n.out_width = conv_extent(n.in_width);
        break;
      case LayerKind::dense:
        if (l.out_channels == 0) fail(ErrorCategory::invalid_graph, where(l) + ": out_channels must be >= 1");
        n.out_channels = l.out_channels;
        n.out_height = n.out_width = 1;
        break;
      case LayerKind::maxpool:
        if (n.in_height < 2 || n.in_width < 2) fail(ErrorCategory::invalid_graph, where(l) + ": input smaller than 2x2");
        n.out_channels = n.in_channels;
        n.out_height = n.in_height / 2;
        n.out_width = n.in_width / 2;
        break;
      case LayerKind::gap:
        n.out_channels = n.in_channels;
        n.out_height = n.out_width = 1;
        break;
      case LayerKind::add:
        for (auto q : n.preds) {
          const Node& o = g.nodes_[q];
          if (o.out_channels != p.out_channels || o.out_height != p.out_height || o.out_width != p.out_width) {
            fail(ErrorCategory::invalid_graph, where(l) + ": channel/shape mismatch across residual add ('" +
                                                   p.spec.name + "' " + std::to_string(p.out_channels) + " channels vs '" +
                                                   o.spec.name + "' " + std::to_string(o.out_channels) + ")");
          }
        }
        [[fallthrough]];
      case LayerKind::relu:
      case LayerKind::scale_shift:
        n.out_channels = n.in_channels;
        n.out_height = n.in_height;
        n.out_width = n.in_width;
        break;
      case LayerKind::softmax_ce:
        if (n.in_height != 1 || n.in_width != 1) {
          fail(ErrorCategory::invalid_graph, where(l) + ": loss input must be a flat vector (dense or gap output)");
        }
        if (n.in_channels < 2) fail(ErrorCategory::invalid_graph, where(l) + ": need at least two classes");
        n.out_channels = n.out_height = n.out_width = 1;
        ++loss_count;
        break;
      case LayerKind::input:
        break;
    }
    index.emplace(l.name, g.nodes_.size());
    g.nodes_.push_back(std::move(n));
  }
  if (loss_count != 1 || g.nodes_.back().spec.kind != LayerKind::softmax_ce) {
    fail(ErrorCategory::invalid_graph, "architecture needs exactly one softmax_ce loss, listed last");
  }

  // Channel spaces.
  const std::size_t n_nodes = g.nodes_.size();
  detail::DisjointSets ds(n_nodes);
  for (std::size_t i = 1; i < n_nodes; ++i) {
    const auto kind = g.nodes_[i].spec.kind;
    if (kind == LayerKind::conv || kind == LayerKind::dense || kind == LayerKind::softmax_ce) continue;
    for (auto p : g.nodes_[i].preds) ds.unite(i, p);
  }
  std::map<std::size_t, std::size_t> root_to_space;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    auto r = ds.find(i);
    auto [it, inserted] = root_to_space.emplace(r, g.spaces_.size());
    if (inserted) {
      g.spaces_.push_back({});
      g.spaces_.back().prunable = true;
    }
    auto& sp = g.spaces_[it->second];
    g.nodes_[i].space = it->second;
    sp.nodes.push_back(i);
    sp.channels = g.nodes_[i].out_channels;
    const auto kind = g.nodes_[i].spec.kind;
    if (kind == LayerKind::input || kind == LayerKind::dense || kind == LayerKind::softmax_ce) sp.prunable = false;
  }
  g.spaces_[g.nodes_[g.nodes_.back().preds[0]].space].prunable = false;  // logits

  for (std::size_t i = 0; i < n_nodes; ++i) {
    const auto kind = g.nodes_[i].spec.kind;
    auto& sp = g.spaces_[g.nodes_[i].space];
    if ((kind == LayerKind::conv || kind == LayerKind::depthwise) && sp.prunable) {
      sp.prunable_layers.push_back(g.prunable_.size());
      g.prunable_.push_back(i);
    }
  }
  for (auto& sp : g.spaces_) {
    if (sp.prunable && sp.prunable_layers.empty()) sp.prunable = false;  // no filters to rank
  }

  // Coupling groups, ordered by the space's first prunable layer.
  std::vector<std::size_t> order;
  for (std::size_t s = 0; s < g.spaces_.size(); ++s) {
    if (g.spaces_[s].prunable) order.push_back(s);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return g.spaces_[a].prunable_layers.front() < g.spaces_[b].prunable_layers.front();
  });
  g.group_base_.assign(g.spaces_.size(), 0);
  for (auto s : order) {
    g.group_base_[s] = g.groups_.size();
    for (std::size_t c = 0; c < g.spaces_[s].channels; ++c) {
      CouplingGroup grp;
      grp.space = s;
      grp.channel = c;
      for (auto ord : g.spaces_[s].prunable_layers) grp.members.push_back({ord, c});
      g.groups_.push_back(std::move(grp));
    }
  }
  return g;
}

}  // namespace legr
