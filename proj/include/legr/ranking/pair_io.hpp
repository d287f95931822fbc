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

#include <string>

#include "json.hpp"

#include "legr/archgraph/graph.hpp"
#include "legr/error.hpp"
#include "legr/io.hpp"
#include "legr/ranking/ranking.hpp"

// Learned affine pairs are stored as JSON:
//   {"format": "legr-pair/1", "fingerprint": "<graph>",
//    "layers": [{"layer_name": "c1", "alpha": 1.0, "kappa": 0.0}, ...]}
namespace legr {

inline std::string format_pair(const NetworkGraph& g, const AffinePair& pair) {
  validate_pair(g, pair);
  nlohmann::json j;
  j["format"] = "legr-pair/1";
  j["fingerprint"] = g.fingerprint();
  j["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < pair.size(); ++l) {
    j["layers"].push_back({{"layer_name", g.prunable_node(l).spec.name}, {"alpha", pair.alpha[l]}, {"kappa", pair.kappa[l]}});
  }
  return j.dump(2) + "\n";
}

inline AffinePair parse_pair(const NetworkGraph& g, const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCategory::parse, std::string("pair file: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "legr-pair/1") fail(ErrorCategory::parse, "pair file: format must be legr-pair/1");
  const auto fp = j.value("fingerprint", "");
  if (fp != g.fingerprint()) {
    fail(ErrorCategory::fingerprint_mismatch, "pair was learned for graph " + fp + ", not " + g.fingerprint());
  }
  const auto& layers = j.at("layers");
  if (!layers.is_array() || layers.size() != g.prunable_count()) {
    fail(ErrorCategory::parse, "pair file: expected " + std::to_string(g.prunable_count()) + " layer records");
  }
  AffinePair pair;
  try {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& rec = layers[l];
      if (rec.at("layer_name").get<std::string>() != g.prunable_node(l).spec.name) {
        fail(ErrorCategory::parse, "pair file: record " + std::to_string(l) + " should be layer '" +
                                       g.prunable_node(l).spec.name + "'");
      }
      pair.alpha.push_back(rec.at("alpha").get<double>());
      pair.kappa.push_back(rec.at("kappa").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::parse, std::string("pair file: ") + e.what());
  }
  validate_pair(g, pair);
  return pair;
}

inline void save_pair(const std::string& path, const NetworkGraph& g, const AffinePair& pair) {
  write_file(path, format_pair(g, pair));
}

inline AffinePair load_pair(const std::string& path, const NetworkGraph& g) { return parse_pair(g, read_file(path)); }

}  // namespace legr
