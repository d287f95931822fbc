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

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "legr/archgraph/graph.hpp"
#include "legr/error.hpp"
#include "legr/io.hpp"
#include "legr/nn/params.hpp"
#include "legr/tensor.hpp"

// Checkpoint container:
//   "LEGRCKPT1"                     9 bytes
//   manifest length                 uint64, little-endian
//   manifest                        JSON: fingerprint, dtype tag, tensor list
//   payload                         float64 little-endian, tensors in manifest order
namespace legr {

inline constexpr std::string_view kCheckpointMagic = "LEGRCKPT1";

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string encode_checkpoint(const NetworkGraph& g, const ModelParams& params) {
  validate_params(g, params);
  nlohmann::json manifest;
  manifest["fingerprint"] = g.fingerprint();
  manifest["dtype"] = "f64le";
  manifest["tensors"] = nlohmann::json::array();
  std::vector<const TensorGrid*> order;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& p = params[i];
    if (!p.has_params()) continue;
    manifest["tensors"].push_back({{"layer", g.node(i).spec.name}, {"role", "weight"}, {"shape", p.weights.shape()}});
    order.push_back(&p.weights);
    if (p.bias) {
      manifest["tensors"].push_back({{"layer", g.node(i).spec.name}, {"role", "bias"}, {"shape", p.bias->shape()}});
      order.push_back(&*p.bias);
    }
  }
  const std::string text = manifest.dump();
  std::string out(kCheckpointMagic);
  detail::put_u64(out, text.size());
  out += text;
  for (const auto* t : order) {
    for (double v : t->values()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline ModelParams decode_checkpoint(const NetworkGraph& g, std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() + 8 || bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    fail(ErrorCategory::bad_magic, "not a LEGRCKPT1 checkpoint");
  }
  std::size_t at = kCheckpointMagic.size();
  const std::uint64_t len = detail::get_u64(bytes, at);
  at += 8;
  if (bytes.size() - at < len) fail(ErrorCategory::truncated, "checkpoint manifest truncated");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(at, len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::parse, std::string("checkpoint manifest: ") + e.what());
  }
  at += len;
  if (manifest.value("dtype", "") != "f64le") fail(ErrorCategory::parse, "checkpoint dtype must be f64le");
  if (manifest.value("fingerprint", "") != g.fingerprint()) {
    fail(ErrorCategory::fingerprint_mismatch, "checkpoint was written for graph " + manifest.value("fingerprint", "?") +
                                                  ", not " + g.fingerprint());
  }
  ModelParams params(g.size());
  for (const auto& t : manifest.at("tensors")) {
    const auto name = t.at("layer").get<std::string>();
    const auto role = t.at("role").get<std::string>();
    const auto shape = t.at("shape").get<Shape>();
    auto node = g.find(name);
    if (!node) fail(ErrorCategory::shape_mismatch, "checkpoint tensor for unknown layer '" + name + "'");
    const std::size_t n = shape_volume(shape);
    if ((bytes.size() - at) / 8 < n) fail(ErrorCategory::truncated, "checkpoint payload truncated at '" + name + "'");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i, at += 8) data[i] = std::bit_cast<double>(detail::get_u64(bytes, at));
    TensorGrid tensor(shape, std::move(data));
    auto& p = params[*node];
    if (role == "weight") {
      p.weights = std::move(tensor);
    } else if (role == "bias") {
      p.bias = std::move(tensor);
    } else {
      fail(ErrorCategory::parse, "checkpoint tensor role '" + role + "'");
    }
  }
  if (at != bytes.size()) fail(ErrorCategory::parse, "checkpoint has trailing bytes");
  validate_params(g, params);
  for (auto& p : params) p.reset_state();
  return params;
}

inline void save_checkpoint(const std::string& path, const NetworkGraph& g, const ModelParams& params) {
  write_file(path, encode_checkpoint(g, params));
}

inline ModelParams load_checkpoint(const std::string& path, const NetworkGraph& g) {
  return decode_checkpoint(g, read_file(path));
}

}  // namespace legr
