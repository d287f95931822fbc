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

// legr_cli: pretrain, search, sweep, baseline, flops and eval commands over an
// experiment manifest. On failure prints "error <category>: <message>" on one
// line to stderr and exits with status 2.
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "legr/cli/pipeline.hpp"

namespace {

struct Options {
  std::string manifest;
  std::string checkpoint;
  std::string pair;
  std::string out;
  std::string zetas;
  std::string arch;
  std::string mask;
  std::string kind = "uniform";
  std::optional<std::uint64_t> seed;
};

std::vector<double> parse_zeta_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      legr::fail(legr::ErrorCategory::invalid_argument, "--zetas: '" + item + "' is not a number");
    }
  }
  legr::validate_zetas(out);
  return out;
}

legr::Experiment experiment(const Options& o) {
  if (o.manifest.empty()) legr::fail(legr::ErrorCategory::invalid_argument, "--manifest is required");
  auto m = legr::load_manifest(o.manifest);
  if (o.seed) m.seed = *o.seed;
  if (!o.out.empty()) m.output = std::filesystem::absolute(o.out).string();
  if (!o.zetas.empty()) m.zetas = parse_zeta_list(o.zetas);
  return legr::load_experiment(std::move(m));
}

legr::ModelParams pretrained(const legr::Experiment& e, const Options& o) {
  return legr::load_checkpoint(o.checkpoint.empty() ? legr::pretrained_path(e) : o.checkpoint, e.graph);
}

int run(const std::string& command, const Options& o) {
  if (command == "flops") {
    const std::string arch = !o.arch.empty() ? o.arch : legr::load_manifest(o.manifest).architecture_path();
    const auto g = legr::load_graph(arch);
    const auto mask = o.mask.empty() ? legr::full_mask(g) : legr::load_mask(o.mask, g);
    std::cout << legr::format_flop_table(g, mask);
    return 0;
  }
  const auto e = experiment(o);
  if (command == "pretrain") {
    const auto r = legr::run_pretrain(e, &std::cerr);
    std::cout << "checkpoint " << r.checkpoint << "\ntest_accuracy " << r.test_accuracy << '\n';
  } else if (command == "search") {
    const auto r = legr::run_search(e, pretrained(e, o));
    std::cout << "pair " << legr::pair_path(e) << "\nbest_fitness " << r.best_fitness << '\n';
  } else if (command == "sweep") {
    const auto params = pretrained(e, o);
    const auto pair = legr::load_pair(o.pair.empty() ? legr::pair_path(e) : o.pair, e.graph);
    std::cout << legr::format_sweep_report(legr::run_sweep(e, params, pair, e.manifest.zetas, &std::cerr));
  } else if (command == "baseline") {
    const auto kind = legr::parse_baseline(o.kind);
    std::cout << legr::format_sweep_report(
        legr::run_baseline(e, pretrained(e, o), kind, e.manifest.zetas, &std::cerr));
  } else if (command == "eval") {
    if (!o.arch.empty()) {
      const auto g = legr::load_graph(o.arch);
      const legr::Network net(g, legr::load_checkpoint(o.checkpoint, g));
      std::cout << "test_accuracy " << legr::evaluate(net, e.data.test) << '\n';
    } else {
      const legr::Network net(e.graph, pretrained(e, o));
      std::cout << "test_accuracy " << legr::evaluate(net, e.data.test) << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned global filter ranking and FLOP-targeted pruning"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  auto common = [&](CLI::App* sub, bool with_manifest_required) {
    auto* opt = sub->add_option("--manifest", o.manifest, "Experiment manifest (YAML)");
    if (with_manifest_required) opt->required();
    sub->add_option("--out", o.out, "Output directory (overrides the manifest)");
    sub->add_option("--seed", seed, "Global seed (overrides the manifest)");
    sub->add_option("--zetas", o.zetas, "Comma-separated FLOP targets, descending");
    sub->add_option("--checkpoint", o.checkpoint, "Pretrained checkpoint (default: <out>/pretrained.ckpt)");
  };
  common(app.add_subcommand("pretrain", "Train the base model"), true);
  common(app.add_subcommand("search", "Learn the per-layer affine pair"), true);
  auto* sweep = app.add_subcommand("sweep", "Prune, fine-tune and evaluate at every FLOP target");
  common(sweep, true);
  sweep->add_option("--pair", o.pair, "Affine pair file (default: <out>/pair.json)");
  auto* baseline = app.add_subcommand("baseline", "Sweep with a baseline pruner");
  common(baseline, true);
  baseline->add_option("--kind", o.kind, "uniform | local_norm_uniform | global_norm");
  auto* flops = app.add_subcommand("flops", "Per-layer multiply-accumulate table");
  flops->add_option("--arch", o.arch, "Architecture file");
  flops->add_option("--manifest", o.manifest, "Manifest naming the architecture");
  flops->add_option("--mask", o.mask, "Mask sidecar");
  auto* eval = app.add_subcommand("eval", "Test accuracy of a checkpoint");
  common(eval, true);
  eval->add_option("--arch", o.arch, "Architecture of the checkpoint (default: the manifest's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error usage: " << e.what() << '\n';
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  auto* sub = app.get_subcommands().front();
  if (sub->get_option_no_throw("--seed") != nullptr && sub->count("--seed") > 0) o.seed = seed;
  if (command == "flops" && o.arch.empty() && o.manifest.empty()) {
    std::cerr << "error usage: flops needs --arch or --manifest\n";
    return 2;
  }
  try {
    return run(command, o);
  } catch (const legr::Error& e) {
    std::cerr << "error " << legr::category_name(e.category()) << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error internal: " << e.what() << '\n';
  }
  return 2;
}
