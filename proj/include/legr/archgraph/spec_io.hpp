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
#include <set>
#include <sstream>
#include <string>

#include <yaml-cpp/yaml.h>

#include "legr/archgraph/graph.hpp"
#include "legr/error.hpp"

// Architecture description files (YAML):
//
//   schema: legr-arch/1
//   name: tiny
//   input: {channels: 1, height: 16, width: 16}
//   layers:
//     - {name: c1, kind: conv, k: 3, stride: 1, pad: 1, out_channels: 8, inputs: [input]}
//     - {name: r1, kind: relu, inputs: [c1]}
//     ...
//     - {name: loss, kind: softmax_ce, inputs: [fc]}
//
// k/stride/pad default to 1/1/0 and `inputs` defaults to the previous layer.
namespace legr {

inline constexpr std::string_view kArchSchema = "legr-arch/1";

namespace detail {

[[noreturn]] inline void yaml_fail(const std::string& source, const YAML::Node& at, const std::string& what) {
  const auto mark = at.Mark();
  std::string where = source;
  if (mark.line >= 0) where += ":" + std::to_string(mark.line + 1);
  fail(ErrorCategory::parse, where + ": " + what);
}

inline void check_keys(const std::string& source, const YAML::Node& map, std::initializer_list<std::string_view> allowed) {
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) yaml_fail(source, kv.first, "unknown key '" + key + "'");
  }
}

template <typename T>
T yaml_get(const std::string& source, const YAML::Node& parent, const char* key, const T& fallback, bool required) {
  const YAML::Node v = parent[key];
  if (!v) {
    if (required) yaml_fail(source, parent, std::string("missing field '") + key + "'");
    return fallback;
  }
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    yaml_fail(source, v, std::string("field '") + key + "' has the wrong type");
  }
}

inline std::size_t yaml_count(const std::string& source, const YAML::Node& parent, const char* key,
                              std::size_t fallback, bool required) {
  const long v = yaml_get<long>(source, parent, key, static_cast<long>(fallback), required);
  if (v < 0) yaml_fail(source, parent[key], std::string("field '") + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

inline ArchSpec parse_arch_spec(const std::string& text, const std::string& source = "<arch>") {
  using namespace detail;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    fail(ErrorCategory::parse, source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) fail(ErrorCategory::parse, source + ": expected a mapping at top level");
  check_keys(source, root, {"schema", "name", "input", "layers"});
  const auto schema = yaml_get<std::string>(source, root, "schema", "", true);
  if (schema != kArchSchema) yaml_fail(source, root["schema"], "unsupported schema '" + schema + "'");
  ArchSpec spec;
  spec.name = yaml_get<std::string>(source, root, "name", "net", false);
  const YAML::Node input = root["input"];
  if (!input || !input.IsMap()) yaml_fail(source, root, "missing 'input' mapping");
  check_keys(source, input, {"channels", "height", "width"});
  spec.in_channels = yaml_count(source, input, "channels", 0, true);
  spec.in_height = yaml_count(source, input, "height", 0, true);
  spec.in_width = yaml_count(source, input, "width", 0, true);
  const YAML::Node layers = root["layers"];
  if (!layers || !layers.IsSequence()) yaml_fail(source, root, "missing 'layers' list");
  std::string previous(kInputName);
  for (const auto& item : layers) {
    if (!item.IsMap()) yaml_fail(source, item, "layer entries must be mappings");
    check_keys(source, item, {"name", "kind", "k", "stride", "pad", "out_channels", "inputs"});
    LayerSpec l;
    l.name = yaml_get<std::string>(source, item, "name", "", true);
    const auto kind_text = yaml_get<std::string>(source, item, "kind", "", true);
    const auto kind = parse_kind(kind_text);
    if (!kind || *kind == LayerKind::input) yaml_fail(source, item["kind"], "unknown layer kind '" + kind_text + "'");
    l.kind = *kind;
    l.k = yaml_count(source, item, "k", 1, false);
    l.stride = yaml_count(source, item, "stride", 1, false);
    l.pad = yaml_count(source, item, "pad", 0, false);
    const bool needs_width = l.kind == LayerKind::conv || l.kind == LayerKind::dense;
    l.out_channels = yaml_count(source, item, "out_channels", 0, needs_width);
    if (item["inputs"]) {
      try {
        l.inputs = item["inputs"].as<std::vector<std::string>>();
      } catch (const YAML::Exception&) {
        yaml_fail(source, item["inputs"], "'inputs' must be a list of layer names");
      }
    } else {
      l.inputs = {previous};
    }
    previous = l.name;
    spec.layers.push_back(std::move(l));
  }
  try {
    (void)build_graph(spec);
  } catch (const Error& e) {
    fail(ErrorCategory::invalid_graph, source + ": " + e.what());
  }
  return spec;
}

inline std::string format_arch_spec(const ArchSpec& spec) {
  std::ostringstream os;
  os << "schema: " << kArchSchema << '\n';
  os << "name: " << spec.name << '\n';
  os << "input: {channels: " << spec.in_channels << ", height: " << spec.in_height << ", width: " << spec.in_width
     << "}\n";
  os << "layers:\n";
  for (const auto& l : spec.layers) {
    os << "  - {name: " << l.name << ", kind: " << kind_name(l.kind);
    if (l.kind == LayerKind::conv || l.kind == LayerKind::depthwise) {
      os << ", k: " << l.k << ", stride: " << l.stride << ", pad: " << l.pad;
    }
    if (l.kind == LayerKind::conv || l.kind == LayerKind::dense) os << ", out_channels: " << l.out_channels;
    os << ", inputs: [";
    for (std::size_t i = 0; i < l.inputs.size(); ++i) os << (i ? ", " : "") << l.inputs[i];
    os << "]}\n";
  }
  return os.str();
}

}  // namespace legr
