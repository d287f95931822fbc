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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "legr/cli/pipeline.hpp"
#include "oracles.hpp"

namespace {

using namespace legr;
namespace fs = std::filesystem;

const char* kTinyArch =
    "schema: legr-arch/1\n"
    "name: tiny\n"
    "input: {channels: 1, height: 16, width: 16}\n"
    "layers:\n"
    "  - {name: c1, kind: conv, k: 3, pad: 1, out_channels: 6}\n"
    "  - {name: r1, kind: relu}\n"
    "  - {name: p1, kind: maxpool}\n"
    "  - {name: c2, kind: conv, k: 3, pad: 1, out_channels: 8}\n"
    "  - {name: r2, kind: relu}\n"
    "  - {name: c3, kind: conv, k: 3, pad: 1, out_channels: 8}\n"
    "  - {name: s, kind: add, inputs: [c3, r2]}\n"
    "  - {name: r3, kind: relu}\n"
    "  - {name: g, kind: gap}\n"
    "  - {name: fc, kind: dense, out_channels: 3}\n"
    "  - {name: loss, kind: softmax_ce}\n";

std::string tiny_manifest(const std::string& extra = "") {
  return "schema: legr-manifest/1\n"
         "seed: 4\n"
         "architecture: tiny.yaml\n"
         "output: out\n"
         "dataset: {kind: synth_shapes, train_size: 120, test_size: 60, classes: 3, image_size: 16}\n"
         "pretrain: {steps: 30, batch_size: 16}\n"
         "finetune: {steps: 5, batch_size: 16}\n"
         "search: {iterations: 1, finetune_steps: 2, sample_size: 1, pool_size: 2}\n"
         "sweep: {zetas: [0.8, 0.5]}\n" +
         extra;
}

// Fresh directory holding tiny.yaml and manifest.yaml.
fs::path workspace(const std::string& name, const std::string& manifest = tiny_manifest()) {
  const auto dir = fs::temp_directory_path() / ("legr_cli_" + name);
  fs::remove_all(dir);
  write_file((dir / "tiny.yaml").string(), kTinyArch);
  write_file((dir / "manifest.yaml").string(), manifest);
  return dir;
}

ErrorCategory category_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.category();
  }
  return ErrorCategory::state;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

TEST(Manifest, ParsesDefaultsAndPaths) {
  const auto m = parse_manifest(tiny_manifest(), "m.yaml", "/base");
  EXPECT_EQ(m.seed, 4u);
  EXPECT_EQ(m.architecture_path(), "/base/tiny.yaml");
  EXPECT_EQ(m.output_dir(), "/base/out");
  EXPECT_EQ(m.zetas, (std::vector<double>{0.8, 0.5}));
  EXPECT_EQ(m.search_zeta(), 0.5);
  EXPECT_EQ(m.pretrain.steps, 30u);
  EXPECT_EQ(m.finetune.train.batch_size, 16u);
  EXPECT_EQ(m.search.iterations, 1u);
}

TEST(Manifest, ShippedDeskManifestLoads) {
  const auto m = load_manifest(std::string(LEGR_SOURCE_DIR) + "/configs/desk.yaml");
  EXPECT_EQ(m.search.iterations, 50u);
  EXPECT_EQ(m.search.finetune_steps, 50u);
  EXPECT_EQ(m.search_zeta(), 0.25);
  EXPECT_EQ(m.finetune.steps, 2000u);
}

TEST(Manifest, UnknownKeyIsParseErrorWithLine) {
  const auto text = tiny_manifest("colour: blue\n");
  EXPECT_EQ(category_of([&] { parse_manifest(text, "m.yaml", "."); }), ErrorCategory::parse);
  EXPECT_NE(message_of([&] { parse_manifest(text, "m.yaml", "."); }).find("m.yaml:10"), std::string::npos);
}

TEST(Manifest, MissingDatasetPathNamesField) {
  const std::string text =
      "schema: legr-manifest/1\narchitecture: a.yaml\n"
      "dataset: {kind: idx, train_images: a, train_labels: b, test_images: c}\nsweep: {zetas: [0.5]}\n";
  EXPECT_NE(message_of([&] { parse_manifest(text, "m.yaml", "."); }).find("test_labels"), std::string::npos);
}

TEST(Manifest, ZetaListRules) {
  EXPECT_NO_THROW(validate_zetas({1.0, 0.5, 0.2}));
  EXPECT_THROW(validate_zetas({0.5, 0.8}), Error);
  EXPECT_THROW(validate_zetas({0.5, 0.5}), Error);
  EXPECT_THROW(validate_zetas({1.2}), Error);
  EXPECT_THROW(validate_zetas({0.0}), Error);
  EXPECT_THROW(validate_zetas({}), Error);
}

TEST(Manifest, WrongSchema) {
  std::string text = tiny_manifest();
  text.replace(text.find("legr-manifest/1"), 15, "legr-manifest/9");
  EXPECT_EQ(category_of([&] { parse_manifest(text, "m.yaml", "."); }), ErrorCategory::parse);
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(workspace("pipeline"));
    e_ = new Experiment(load_experiment(load_manifest((*dir_ / "manifest.yaml").string())));
    pre_ = new PretrainResult(run_pretrain(*e_));
  }
  static void TearDownTestSuite() {
    delete pre_;
    delete e_;
    delete dir_;
  }
  static fs::path* dir_;
  static Experiment* e_;
  static PretrainResult* pre_;
};

fs::path* Pipeline::dir_ = nullptr;
Experiment* Pipeline::e_ = nullptr;
PretrainResult* Pipeline::pre_ = nullptr;

TEST_F(Pipeline, PretrainIsReproducible) {
  const std::string bytes = read_file(pre_->checkpoint);
  const auto again = run_pretrain(*e_);
  EXPECT_EQ(read_file(again.checkpoint), bytes);
  EXPECT_EQ(encode_checkpoint(e_->graph, load_checkpoint(again.checkpoint, e_->graph)), bytes);
  EXPECT_TRUE(fs::exists(*dir_ / "out" / "pretrain_log.csv"));
}

TEST_F(Pipeline, SingleIterationSearchWritesOneRow) {
  const auto r = run_search(*e_, pre_->params);
  EXPECT_EQ(r.history.size(), 1u);
  const auto csv = read_file((*dir_ / "out" / "search_history.csv").string());
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  const auto pair = load_pair(pair_path(*e_), e_->graph);
  EXPECT_EQ(pair, r.best);
  EXPECT_EQ(format_pair(e_->graph, pair), read_file(pair_path(*e_)));
}

TEST_F(Pipeline, SweepNeverSearchesAndMasksNest) {
  Rng rng(3);
  const auto pair = legr::testing::random_pair(e_->graph.prunable_count(), rng);
  const auto before = search_invocations().load();
  const auto rows = run_sweep(*e_, pre_->params, pair, {0.9, 0.7, 0.5, 0.3});
  EXPECT_EQ(search_invocations().load(), before);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].status, "ok");
    EXPECT_LE(rows[i].flop_ratio, rows[i].zeta);
    EXPECT_EQ(rows[i].finetune_steps, 5u);
    if (i > 0) EXPECT_TRUE(legr::testing::layerwise_subset(*rows[i].mask, *rows[i - 1].mask));
  }
  const auto stem = (*dir_ / "out" / "legr" / zeta_tag(0.5)).string();
  const auto mask_text = read_file(stem + ".mask");
  EXPECT_EQ(format_mask(e_->graph, load_mask(stem + ".mask", e_->graph)), mask_text);
  const auto small = load_graph(stem + ".yaml");
  EXPECT_EQ(encode_checkpoint(small, load_checkpoint(stem + ".ckpt", small)), read_file(stem + ".ckpt"));
}

TEST_F(Pipeline, InfeasibleRowFailsAndSweepContinues) {
  const auto rows = run_sweep(*e_, pre_->params, AffinePair::identity(e_->graph.prunable_count()), {0.6, 0.0001});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].status, "ok");
  EXPECT_EQ(rows[1].status, "infeasible");
}

TEST_F(Pipeline, GlobalNormMatchesIdentitySweepAndSchemasAgree) {
  const std::vector<double> zetas{0.8, 0.4};
  const auto legr_rows = run_sweep(*e_, pre_->params, AffinePair::identity(e_->graph.prunable_count()), zetas);
  const auto global = run_baseline(*e_, pre_->params, BaselineKind::global_norm, zetas);
  const auto uniform = run_baseline(*e_, pre_->params, BaselineKind::uniform, zetas);
  for (std::size_t i = 0; i < zetas.size(); ++i) {
    EXPECT_EQ(legr_rows[i].mask->keep, global[i].mask->keep);
    EXPECT_LE(uniform[i].flop_ratio, zetas[i]);
  }
  auto header = [&](const std::string& tag) {
    const auto text = read_file((*dir_ / "out" / (tag + "_report.csv")).string());
    return text.substr(0, text.find('\n'));
  };
  EXPECT_EQ(header("legr"), std::string(kSweepHeader));
  EXPECT_EQ(header("global_norm"), header("legr"));
  EXPECT_EQ(header("uniform"), header("legr"));
}

TEST_F(Pipeline, FullTargetRowRunsFinetune) {
  const auto rows = run_sweep(*e_, pre_->params, AffinePair::identity(e_->graph.prunable_count()), {1.0});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].flop_ratio, 1.0);
  EXPECT_EQ(rows[0].params_kept, parameter_count(pre_->params));
}

struct Run {
  int status;
  std::string out;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(LEGR_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  while (std::fgets(buf.data(), buf.size(), p)) out += buf.data();
  const int st = pclose(p);
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

TEST(Cli, FlopsTableSumsToTotal) {
  const auto dir = workspace("flops");
  const auto r = run_cli("flops --arch " + (dir / "tiny.yaml").string());
  ASSERT_EQ(r.status, 0) << r.out;
  const auto g = load_graph((dir / "tiny.yaml").string());
  EXPECT_NE(r.out.find("total,,,," + std::to_string(full_flops(g)) + "\n"), std::string::npos);
  std::istringstream is(r.out);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "layer,kind,kept_channels,total_channels,flops");
  Flops sum = 0;
  while (std::getline(is, line)) {
    if (line.rfind("total", 0) == 0) break;
    sum += std::stoull(line.substr(line.rfind(',') + 1));
  }
  EXPECT_EQ(sum, full_flops(g));
}

TEST(Cli, FlopsWithMaskMatchesCounter) {
  const auto dir = workspace("flops_mask");
  const auto g = load_graph((dir / "tiny.yaml").string());
  Rng rng(8);
  const auto m = legr::testing::random_mask(g, rng);
  save_mask((dir / "m.mask").string(), g, m);
  const auto r = run_cli("flops --manifest " + (dir / "manifest.yaml").string() + " --mask " + (dir / "m.mask").string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("total,,,," + std::to_string(legr::testing::oracle_macs(g, m)) + "\n"), std::string::npos);
}

TEST(Cli, ErrorsAreOneCategorisedLine) {
  const auto dir = workspace("errors");
  write_file((dir / "bad.yaml").string(), "schema: legr-arch/1\ninput: {channels: 1, height: 8, width: 8}\nlayers:\n  - {name: x, kind: warp}\n");
  auto r = run_cli("flops --arch " + (dir / "bad.yaml").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_EQ(r.out.rfind("error parse: ", 0), 0u) << r.out;
  EXPECT_NE(r.out.find("bad.yaml:4"), std::string::npos);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);

  r = run_cli("sweep --manifest " + (dir / "manifest.yaml").string() + " --zetas 0.5,0.8");
  EXPECT_EQ(r.status, 2);
  EXPECT_EQ(r.out.rfind("error invalid_argument: ", 0), 0u) << r.out;

  r = run_cli("eval --manifest " + (dir / "manifest.yaml").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_EQ(r.out.rfind("error io: ", 0), 0u) << r.out;

  r = run_cli("baseline --manifest " + (dir / "manifest.yaml").string() + " --kind random");
  EXPECT_EQ(r.status, 2);

  r = run_cli("frobnicate");
  EXPECT_EQ(r.status, 2);
  EXPECT_EQ(r.out.rfind("error usage: ", 0), 0u) << r.out;
}

TEST(Cli, EndToEndSmoke) {
  const auto dir = workspace("e2e");
  const std::string m = " --manifest " + (dir / "manifest.yaml").string();
  auto r = run_cli("pretrain" + m);
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("test_accuracy"), std::string::npos);
  r = run_cli("search" + m);
  ASSERT_EQ(r.status, 0) << r.out;
  r = run_cli("sweep" + m);
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find(std::string(kSweepHeader)), std::string::npos);
  r = run_cli("baseline --kind uniform" + m);
  ASSERT_EQ(r.status, 0) << r.out;
  r = run_cli("eval" + m);
  ASSERT_EQ(r.status, 0) << r.out;
  const auto small = (dir / "out" / "legr" / zeta_tag(0.5)).string();
  r = run_cli("eval --arch " + small + ".yaml --checkpoint " + small + ".ckpt" + m);
  ASSERT_EQ(r.status, 0) << r.out;
  r = run_cli("search --seed 9 --out " + (dir / "other").string() + m + " --checkpoint " +
              (dir / "out" / "pretrained.ckpt").string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "other" / "pair.json"));
}

}  // namespace
