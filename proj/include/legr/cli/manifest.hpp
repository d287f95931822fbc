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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "legr/archgraph/spec_io.hpp"
#include "legr/error.hpp"
#include "legr/io.hpp"
#include "legr/nn/train.hpp"
#include "legr/search/search.hpp"

// Experiment manifests (YAML). Relative paths resolve against the manifest's
// directory.
//
//   schema: legr-manifest/1
//   seed: 1
//   architecture: desk_cnn.yaml
//   output: ../runs/desk
//   dataset: {kind: synth_shapes, train_size: 2000, test_size: 400, classes: 4, image_size: 16}
//   pretrain: {steps: 1500, learning_rate: 0.01, lr_drops: [0.5, 0.75]}
//   finetune: {steps: 2000, learning_rate: 0.01}
//   search: {iterations: 50, finetune_steps: 50, sample_size: 8, pool_size: 16}
//   sweep: {zetas: [0.75, 0.5, 0.25]}
namespace legr {

inline constexpr std::string_view kManifestSchema = "legr-manifest/1";

struct DatasetSpec {
  std::string kind = "synth_shapes";  // synth_shapes | idx
  std::size_t train_size = 2000;
  std::size_t test_size = 400;
  std::size_t classes = 4;
  std::size_t image_size = 16;
  double noise = 0.3;
  double max_shift = 0.125;
  std::string train_images, train_labels, test_images, test_labels;
  double val_fraction = 0.10;
  bool stratified = true;
};

struct PhaseConfig {
  std::size_t steps = 0;
  TrainConfig train;             // lr_schedule filled from the drops below
  std::vector<double> lr_drops;  // fractions of `steps`
  double lr_drop_factor = 0.1;

  TrainConfig resolved(std::uint64_t seed) const {
    TrainConfig c = train;
    c.lr_schedule = fractional_drops(steps, lr_drops, lr_drop_factor);
    c.seed = seed;
    return c;
  }
};

struct ExperimentManifest {
  std::filesystem::path base_dir;
  std::string architecture;
  std::string output;
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  PhaseConfig pretrain;
  PhaseConfig finetune;
  SearchConfig search;
  std::optional<double> zeta_hat;  // defaults to the smallest sweep target
  std::vector<double> zetas;

  std::string resolve(const std::string& path) const {
    if (path.empty()) return path;
    const std::filesystem::path p(path);
    return p.is_absolute() ? path : (base_dir / p).lexically_normal().string();
  }
  std::string architecture_path() const { return resolve(architecture); }
  std::string output_dir() const { return resolve(output); }
  double search_zeta() const;
};

// Targets must lie in (0, 1], strictly descending.
inline void validate_zetas(const std::vector<double>& zetas) {
  if (zetas.empty()) fail(ErrorCategory::invalid_argument, "sweep needs at least one zeta");
  for (std::size_t i = 0; i < zetas.size(); ++i) {
    if (!(zetas[i] > 0.0 && zetas[i] <= 1.0)) fail(ErrorCategory::invalid_argument, "zeta values must lie in (0, 1]");
    if (i > 0 && !(zetas[i] < zetas[i - 1])) {
      fail(ErrorCategory::invalid_argument, "zeta list must be sorted descending with distinct values");
    }
  }
}

inline double ExperimentManifest::search_zeta() const {
  if (zeta_hat) return *zeta_hat;
  validate_zetas(zetas);
  return zetas.back();
}

namespace detail {

inline PhaseConfig parse_phase(const std::string& src, const YAML::Node& node, const char* name, PhaseConfig phase) {
  const YAML::Node n = node[name];
  if (!n) return phase;
  if (!n.IsMap()) yaml_fail(src, n, std::string("'") + name + "' must be a mapping");
  check_keys(src, n, {"steps", "learning_rate", "momentum", "nesterov", "weight_decay", "batch_size", "lr_drops",
                      "lr_drop_factor"});
  phase.steps = yaml_count(src, n, "steps", phase.steps, false);
  auto& t = phase.train;
  t.learning_rate = yaml_get<double>(src, n, "learning_rate", t.learning_rate, false);
  t.momentum = yaml_get<double>(src, n, "momentum", t.momentum, false);
  t.nesterov = yaml_get<bool>(src, n, "nesterov", t.nesterov, false);
  t.weight_decay = yaml_get<double>(src, n, "weight_decay", t.weight_decay, false);
  t.batch_size = yaml_count(src, n, "batch_size", t.batch_size, false);
  phase.lr_drops = yaml_get<std::vector<double>>(src, n, "lr_drops", phase.lr_drops, false);
  phase.lr_drop_factor = yaml_get<double>(src, n, "lr_drop_factor", phase.lr_drop_factor, false);
  try {
    validate_train_config(t);
  } catch (const Error& e) {
    yaml_fail(src, n, std::string(name) + ": " + e.what());
  }
  return phase;
}

}  // namespace detail

inline ExperimentManifest parse_manifest(const std::string& text, const std::string& source,
                                         const std::filesystem::path& base_dir) {
  using namespace detail;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    fail(ErrorCategory::parse, source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) fail(ErrorCategory::parse, source + ": expected a mapping at top level");
  check_keys(source, root,
             {"schema", "seed", "architecture", "output", "dataset", "pretrain", "finetune", "search", "sweep"});
  const auto schema = yaml_get<std::string>(source, root, "schema", "", true);
  if (schema != kManifestSchema) yaml_fail(source, root["schema"], "unsupported schema '" + schema + "'");

  ExperimentManifest m;
  m.base_dir = base_dir;
  m.seed = yaml_get<std::uint64_t>(source, root, "seed", 0, false);
  m.architecture = yaml_get<std::string>(source, root, "architecture", "", true);
  m.output = yaml_get<std::string>(source, root, "output", "runs", false);

  const YAML::Node ds = root["dataset"];
  if (!ds || !ds.IsMap()) yaml_fail(source, root, "missing 'dataset' mapping");
  check_keys(source, ds, {"kind", "train_size", "test_size", "classes", "image_size", "noise", "max_shift",
                          "train_images", "train_labels", "test_images", "test_labels", "val_fraction", "stratified"});
  auto& d = m.dataset;
  d.kind = yaml_get<std::string>(source, ds, "kind", "", true);
  d.val_fraction = yaml_get<double>(source, ds, "val_fraction", d.val_fraction, false);
  d.stratified = yaml_get<bool>(source, ds, "stratified", d.stratified, false);
  if (d.kind == "synth_shapes") {
    d.train_size = yaml_count(source, ds, "train_size", d.train_size, false);
    d.test_size = yaml_count(source, ds, "test_size", d.test_size, false);
    d.classes = yaml_count(source, ds, "classes", d.classes, false);
    d.image_size = yaml_count(source, ds, "image_size", d.image_size, false);
    d.noise = yaml_get<double>(source, ds, "noise", d.noise, false);
    d.max_shift = yaml_get<double>(source, ds, "max_shift", d.max_shift, false);
  } else if (d.kind == "idx") {
    d.train_images = m.resolve(yaml_get<std::string>(source, ds, "train_images", "", true));
    d.train_labels = m.resolve(yaml_get<std::string>(source, ds, "train_labels", "", true));
    d.test_images = m.resolve(yaml_get<std::string>(source, ds, "test_images", "", true));
    d.test_labels = m.resolve(yaml_get<std::string>(source, ds, "test_labels", "", true));
  } else {
    yaml_fail(source, ds["kind"], "dataset kind must be 'synth_shapes' or 'idx'");
  }

  PhaseConfig pre;
  pre.steps = 1500;
  pre.train.learning_rate = 0.01;
  pre.lr_drops = {0.5, 0.75};
  m.pretrain = parse_phase(source, root, "pretrain", pre);
  PhaseConfig ft;
  ft.steps = 2000;
  ft.train.learning_rate = 0.01;
  ft.lr_drops = {0.5, 0.75};
  m.finetune = parse_phase(source, root, "finetune", ft);

  if (const YAML::Node s = root["search"]) {
    if (!s.IsMap()) yaml_fail(source, s, "'search' must be a mapping");
    check_keys(source, s, {"iterations", "finetune_steps", "sample_size", "pool_size", "mutation_percent", "sigma",
                           "zeta_hat"});
    auto& c = m.search;
    c.iterations = yaml_count(source, s, "iterations", c.iterations, false);
    c.finetune_steps = yaml_count(source, s, "finetune_steps", c.finetune_steps, false);
    c.sample_size = yaml_count(source, s, "sample_size", c.sample_size, false);
    c.pool_size = yaml_count(source, s, "pool_size", c.pool_size, false);
    c.mutation_percent = yaml_get<double>(source, s, "mutation_percent", c.mutation_percent, false);
    c.sigma = yaml_get<double>(source, s, "sigma", c.sigma, false);
    if (s["zeta_hat"]) m.zeta_hat = yaml_get<double>(source, s, "zeta_hat", 0.0, true);
  }

  const YAML::Node sw = root["sweep"];
  if (!sw || !sw.IsMap()) yaml_fail(source, root, "missing 'sweep' mapping");
  check_keys(source, sw, {"zetas"});
  m.zetas = yaml_get<std::vector<double>>(source, sw, "zetas", {}, true);
  try {
    validate_zetas(m.zetas);
    if (m.zeta_hat) check_zeta(*m.zeta_hat);
    SearchConfig probe = m.search;
    probe.zeta_hat_low = m.search_zeta();
    validate_search_config(probe);
  } catch (const Error& e) {
    yaml_fail(source, sw, e.what());
  }
  return m;
}

inline ExperimentManifest load_manifest(const std::string& path) {
  const std::filesystem::path p(path);
  return parse_manifest(read_file(path), path, p.has_parent_path() ? p.parent_path() : std::filesystem::path("."));
}

}  // namespace legr
