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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "legr/archgraph/apply_mask.hpp"
#include "legr/archgraph/flops.hpp"
#include "legr/archgraph/graph.hpp"
#include "legr/archgraph/mask.hpp"
#include "legr/archgraph/spec_io.hpp"
#include "legr/baselines/baselines.hpp"
#include "legr/cli/manifest.hpp"
#include "legr/data/idx.hpp"
#include "legr/data/split.hpp"
#include "legr/data/synth.hpp"
#include "legr/io.hpp"
#include "legr/nn/checkpoint.hpp"
#include "legr/nn/network.hpp"
#include "legr/nn/train.hpp"
#include "legr/ranking/pair_io.hpp"
#include "legr/ranking/ranking.hpp"
#include "legr/search/search.hpp"

// Command implementations behind the legr_cli tool. Each writes its artifacts
// under the manifest's output directory:
//
//   pretrained.ckpt, pretrain_log.csv      pretrain
//   pair.json, search_history.csv          search
//   <tag>_report.csv, <tag>/zeta_*.{yaml,ckpt,mask}   sweep / baseline
namespace legr {

// Loaded manifest, graph and standardized data splits.
struct Experiment {
  ExperimentManifest manifest;
  NetworkGraph graph;
  DataSplits data;
};

inline DataSplits load_data(const ExperimentManifest& m) {
  const auto& d = m.dataset;
  Dataset full, test;
  if (d.kind == "synth_shapes") {
    SynthOptions opt{d.noise, d.max_shift};
    full = synth_shapes(d.train_size, d.classes, d.image_size, substream_seed(m.seed, "data/train"), opt);
    test = synth_shapes(d.test_size, d.classes, d.image_size, substream_seed(m.seed, "data/test"), opt);
  } else {
    full = read_idx(d.train_images, d.train_labels);
    test = read_idx(d.test_images, d.test_labels);
    test.class_count = std::max(test.class_count, full.class_count);
    full.class_count = test.class_count;
  }
  auto [train, val] = split(full, {d.val_fraction, d.stratified, substream_seed(m.seed, "data/split")});
  const auto stats = channel_stats(train);
  standardize(train, stats);
  standardize(val, stats);
  standardize(test, stats);
  return {std::move(train), std::move(val), std::move(test)};
}

inline NetworkGraph load_graph(const std::string& arch_path) {
  return build_graph(parse_arch_spec(read_file(arch_path), arch_path));
}

inline Experiment load_experiment(ExperimentManifest m) {
  NetworkGraph g = load_graph(m.architecture_path());
  DataSplits data = load_data(m);
  if (g.num_classes() < data.train.class_count) {
    fail(ErrorCategory::label_range, "architecture scores " + std::to_string(g.num_classes()) +
                                         " classes, dataset has " + std::to_string(data.train.class_count));
  }
  return {std::move(m), std::move(g), std::move(data)};
}

inline std::string out_path(const Experiment& e, const std::string& name) {
  return (std::filesystem::path(e.manifest.output_dir()) / name).string();
}

inline std::string pretrained_path(const Experiment& e) { return out_path(e, "pretrained.ckpt"); }
inline std::string pair_path(const Experiment& e) { return out_path(e, "pair.json"); }

struct PretrainResult {
  ModelParams params;
  double test_accuracy = 0.0;
  std::string checkpoint;
};

inline PretrainResult run_pretrain(const Experiment& e, std::ostream* log = nullptr) {
  const auto& m = e.manifest;
  Rng init = make_rng(m.seed, "init");
  Network net(e.graph, init);
  const TrainConfig cfg = m.pretrain.resolved(substream_seed(m.seed, "pretrain"));
  std::ostringstream csv;
  csv << "step,loss\n";
  // One uninterrupted run; the loss of each 100th step is logged.
  BatchStream stream(e.data.train, cfg.batch_size, cfg.seed);
  validate_train_config(cfg);
  net.zero_grad();
  for (std::size_t s = 0; s < m.pretrain.steps; ++s) {
    Dataset batch = stream.next();
    const double loss = net.forward(batch.images, batch.labels);
    net.backward();
    sgd_step(net.params(), cfg, s);
    if ((s + 1) % 100 == 0 || s + 1 == m.pretrain.steps) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%zu,%.6f\n", s + 1, loss);
      csv << buf;
      if (log) *log << "pretrain step " << s + 1 << " loss " << loss << '\n';
    }
  }
  PretrainResult r;
  r.test_accuracy = evaluate(net, e.data.test);
  r.checkpoint = pretrained_path(e);
  save_checkpoint(r.checkpoint, e.graph, net.params());
  write_file(out_path(e, "pretrain_log.csv"), csv.str());
  r.params = net.params();
  return r;
}

inline TrainConfig fitness_finetune_config(const ExperimentManifest& m) {
  TrainConfig c = m.finetune.train;
  c.lr_schedule.clear();
  c.seed = substream_seed(m.seed, "search/finetune");
  return c;
}

inline SearchConfig resolved_search_config(const ExperimentManifest& m) {
  SearchConfig c = m.search;
  c.zeta_hat_low = m.search_zeta();
  c.seed = substream_seed(m.seed, "search");
  return c;
}

// Learns the affine pair at the manifest's search budget and persists it with
// the per-iteration history.
inline SearchResult run_search(const Experiment& e, const ModelParams& pretrained) {
  const FitnessContext ctx(e.graph, pretrained, e.data.train, e.data.val, fitness_finetune_config(e.manifest));
  SearchResult r = search(ctx, resolved_search_config(e.manifest));
  save_pair(pair_path(e), e.graph, r.best);
  write_file(out_path(e, "search_history.csv"), format_history(r.history));
  return r;
}

struct SweepRow {
  double zeta = 0.0;
  Flops flops = 0;
  double flop_ratio = 0.0;
  std::size_t params_kept = 0;
  double accuracy = 0.0;
  std::size_t finetune_steps = 0;
  double wall_seconds = 0.0;
  std::string status = "ok";
  std::optional<FilterMask> mask;
};

inline constexpr std::string_view kSweepHeader =
    "zeta,flops,flop_ratio,params_kept,accuracy_after_finetune,finetune_steps,wall_seconds,status";

inline std::string format_sweep_report(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << kSweepHeader << '\n';
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.4f,%llu,%.6f,%zu,%.6f,%zu,%.3f,%s\n", r.zeta,
                  static_cast<unsigned long long>(r.flops), r.flop_ratio, r.params_kept, r.accuracy, r.finetune_steps,
                  r.wall_seconds, r.status.c_str());
    os << buf;
  }
  return os.str();
}

inline std::string zeta_tag(double zeta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "zeta_%.3f", zeta);
  return buf;
}

// Produces the mask for one target; called with targets in descending order.
using MaskSource = std::function<FilterMask(double zeta)>;

// For each target: mask, slice the pretrained weights, fine-tune for the
// manifest's full budget, score on the test split. A failing target is
// recorded with its error category and the sweep moves on.
inline std::vector<SweepRow> run_sweep_with(const Experiment& e, const ModelParams& pretrained,
                                            const std::vector<double>& zetas, const MaskSource& masks,
                                            const std::string& tag, std::ostream* log = nullptr) {
  validate_zetas(zetas);
  const auto& m = e.manifest;
  const Flops f0 = full_flops(e.graph);
  const TrainConfig cfg = m.finetune.resolved(substream_seed(m.seed, "finetune"));
  const auto dir = std::filesystem::path(m.output_dir()) / tag;
  std::vector<SweepRow> rows;
  for (double z : zetas) {
    const auto start = std::chrono::steady_clock::now();
    SweepRow row;
    row.zeta = z;
    try {
      FilterMask mask = masks(z);
      row.flops = total_flops(e.graph, mask);
      row.flop_ratio = static_cast<double>(row.flops) / static_cast<double>(f0);
      PrunedModel pruned = apply_mask(e.graph, pretrained, mask);
      const ArchSpec arch = pruned.graph.arch();
      Network net(std::move(pruned.graph), std::move(pruned.params));
      train_steps(net, e.data.train, cfg, m.finetune.steps);
      row.finetune_steps = m.finetune.steps;
      row.params_kept = parameter_count(net.params());
      row.accuracy = evaluate(net, e.data.test);
      const std::string stem = (dir / zeta_tag(z)).string();
      write_file(stem + ".yaml", format_arch_spec(arch));
      save_checkpoint(stem + ".ckpt", net.graph(), net.params());
      save_mask(stem + ".mask", e.graph, mask);
      row.mask = std::move(mask);
    } catch (const Error& err) {
      row.status = std::string(category_name(err.category()));
      if (log) *log << tag << " " << zeta_tag(z) << " failed: " << err.what() << '\n';
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (log && row.status == "ok") {
      *log << tag << " " << zeta_tag(z) << " flop_ratio " << row.flop_ratio << " accuracy " << row.accuracy << '\n';
    }
    rows.push_back(std::move(row));
  }
  write_file(out_path(e, tag + "_report.csv"), format_sweep_report(rows));
  return rows;
}

// LeGR sweep: one pass over the learned ranking yields nested masks.
inline std::vector<SweepRow> run_sweep(const Experiment& e, const ModelParams& pretrained, const AffinePair& pair,
                                       const std::vector<double>& zetas, std::ostream* log = nullptr) {
  validate_pair(e.graph, pair);
  GreedyPruner pruner(e.graph, importance(filter_norms(e.graph, pretrained), pair, e.graph).ascending());
  return run_sweep_with(
      e, pretrained, zetas, [&](double z) { return pruner.prune_to(z); }, "legr", log);
}

inline std::vector<SweepRow> run_baseline(const Experiment& e, const ModelParams& pretrained, BaselineKind kind,
                                          const std::vector<double>& zetas, std::ostream* log = nullptr) {
  const FilterNorms norms = filter_norms(e.graph, pretrained);
  return run_sweep_with(
      e, pretrained, zetas, [&](double z) { return baseline_prune(kind, e.graph, norms, z); },
      std::string(baseline_name(kind)), log);
}

inline std::string format_flop_table(const NetworkGraph& g, const FilterMask& m) {
  std::ostringstream os;
  os << "layer,kind,kept_channels,total_channels,flops\n";
  Flops total = 0;
  for (const auto& r : flop_table(g, m)) {
    os << r.name << ',' << kind_name(r.kind) << ',' << r.kept_channels << ',' << r.total_channels << ',' << r.flops
       << '\n';
    total += r.flops;
  }
  os << "total,,,," << total << '\n';
  return os.str();
}

}  // namespace legr
