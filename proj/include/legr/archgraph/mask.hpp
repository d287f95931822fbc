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
#include <sstream>
#include <string>
#include <vector>

#include "legr/archgraph/graph.hpp"
#include "legr/error.hpp"
#include "legr/io.hpp"

namespace legr {

// Per prunable layer (by ordinal), one keep bit per output channel.
struct FilterMask {
  std::vector<std::vector<bool>> keep;

  std::size_t kept(std::size_t ordinal) const {
    std::size_t n = 0;
    for (bool b : keep.at(ordinal)) n += b ? 1 : 0;
    return n;
  }

  friend bool operator==(const FilterMask&, const FilterMask&) = default;
};

inline FilterMask full_mask(const NetworkGraph& g) {
  FilterMask m;
  for (auto node : g.prunable_layers()) m.keep.emplace_back(g.node(node).out_channels, true);
  return m;
}

// Builds a mask from one keep bit per coupling group.
inline FilterMask mask_from_groups(const NetworkGraph& g, const std::vector<bool>& group_keep) {
  FilterMask m = full_mask(g);
  const auto& groups = g.coupling_groups();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (const auto& ref : groups[i].members) m.keep[ref.layer][ref.channel] = group_keep.at(i);
  }
  return m;
}

// Structural validity: shape, coupling agreement and at least one kept channel
// per layer. Throws invalid_mask describing the first violation.
inline void validate_mask(const NetworkGraph& g, const FilterMask& m) {
  if (m.keep.size() != g.prunable_count()) {
    fail(ErrorCategory::invalid_mask, "mask has " + std::to_string(m.keep.size()) + " layers, graph has " +
                                          std::to_string(g.prunable_count()) + " prunable layers");
  }
  for (std::size_t l = 0; l < m.keep.size(); ++l) {
    const auto& node = g.prunable_node(l);
    if (m.keep[l].size() != node.out_channels) {
      fail(ErrorCategory::invalid_mask, "mask for layer '" + node.spec.name + "' has " +
                                            std::to_string(m.keep[l].size()) + " bits, expected " +
                                            std::to_string(node.out_channels));
    }
    if (m.kept(l) == 0) fail(ErrorCategory::invalid_mask, "mask empties layer '" + node.spec.name + "'");
  }
  for (const auto& grp : g.coupling_groups()) {
    const bool bit = m.keep[grp.members.front().layer][grp.channel];
    for (const auto& ref : grp.members) {
      if (m.keep[ref.layer][ref.channel] != bit) {
        fail(ErrorCategory::invalid_mask, "coupled channel " + std::to_string(grp.channel) + " disagrees between '" +
                                              g.prunable_node(grp.members.front().layer).spec.name + "' and '" +
                                              g.prunable_node(ref.layer).spec.name + "'");
      }
    }
  }
}

inline bool is_valid_mask(const NetworkGraph& g, const FilterMask& m) {
  try {
    validate_mask(g, m);
    return true;
  } catch (const Error&) {
    return false;
  }
}

// Kept channel count of every channel space (full width for spaces that are
// not prunable).
inline std::vector<std::size_t> kept_per_space(const NetworkGraph& g, const FilterMask& m) {
  std::vector<std::size_t> kept(g.spaces().size());
  for (std::size_t s = 0; s < kept.size(); ++s) {
    const auto& sp = g.space(s);
    kept[s] = sp.prunable ? m.kept(sp.prunable_layers.front()) : sp.channels;
  }
  return kept;
}

// Is a kept ⊆ b kept, layer by layer?
inline bool mask_subset(const FilterMask& a, const FilterMask& b) {
  if (a.keep.size() != b.keep.size()) return false;
  for (std::size_t l = 0; l < a.keep.size(); ++l) {
    if (a.keep[l].size() != b.keep[l].size()) return false;
    for (std::size_t c = 0; c < a.keep[l].size(); ++c) {
      if (a.keep[l][c] && !b.keep[l][c]) return false;
    }
  }
  return true;
}

// Sidecar text format:
//   legr-mask 1 <graph fingerprint>
//   <layer name> <bitstring>
inline std::string format_mask(const NetworkGraph& g, const FilterMask& m) {
  validate_mask(g, m);
  std::ostringstream os;
  os << "legr-mask 1 " << g.fingerprint() << '\n';
  for (std::size_t l = 0; l < m.keep.size(); ++l) {
    os << g.prunable_node(l).spec.name << ' ';
    for (bool b : m.keep[l]) os << (b ? '1' : '0');
    os << '\n';
  }
  return os.str();
}

inline FilterMask parse_mask(const NetworkGraph& g, const std::string& text) {
  std::istringstream is(text);
  std::string magic, version, fp;
  if (!(is >> magic >> version >> fp) || magic != "legr-mask" || version != "1") {
    fail(ErrorCategory::parse, "mask file: missing 'legr-mask 1' header");
  }
  if (fp != g.fingerprint()) {
    fail(ErrorCategory::fingerprint_mismatch, "mask was written for graph " + fp + ", not " + g.fingerprint());
  }
  FilterMask m = full_mask(g);
  std::vector<bool> seen(m.keep.size(), false);
  std::string name, bits;
  while (is >> name >> bits) {
    auto node = g.find(name);
    auto ord = node ? g.prunable_ordinal(*node) : std::nullopt;
    if (!ord) fail(ErrorCategory::parse, "mask file: '" + name + "' is not a prunable layer");
    if (bits.size() != m.keep[*ord].size() || bits.find_first_not_of("01") != std::string::npos) {
      fail(ErrorCategory::parse, "mask file: bad bitstring for '" + name + "'");
    }
    for (std::size_t c = 0; c < bits.size(); ++c) m.keep[*ord][c] = bits[c] == '1';
    seen[*ord] = true;
  }
  for (std::size_t l = 0; l < seen.size(); ++l) {
    if (!seen[l]) fail(ErrorCategory::parse, "mask file: no entry for '" + g.prunable_node(l).spec.name + "'");
  }
  validate_mask(g, m);
  return m;
}

inline void save_mask(const std::string& path, const NetworkGraph& g, const FilterMask& m) {
  write_file(path, format_mask(g, m));
}

inline FilterMask load_mask(const std::string& path, const NetworkGraph& g) {
  return parse_mask(g, read_file(path));
}

}  // namespace legr
