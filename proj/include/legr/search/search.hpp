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
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "legr/archgraph/apply_mask.hpp"
#include "legr/archgraph/graph.hpp"
#include "legr/data/dataset.hpp"
#include "legr/error.hpp"
#include "legr/nn/network.hpp"
#include "legr/nn/train.hpp"
#include "legr/ranking/ranking.hpp"
#include "legr/rng.hpp"

namespace legr {

struct SearchConfig {
  double zeta_hat_low = 0.2;       // FLOP ratio at which rankings are scored
  double sigma = 0.1;              // log-normal random-walk size for alpha
  std::size_t iterations = 400;    // E
  std::size_t sample_size = 16;    // S
  double mutation_percent = 10.0;  // u
  std::size_t pool_size = 64;      // P
  std::size_t finetune_steps = 200;  // tau-hat
  std::uint64_t seed = 0;
};

inline void validate_search_config(const SearchConfig& c) {
  if (c.iterations == 0) fail(ErrorCategory::invalid_argument, "search needs at least one iteration (E >= 1)");
  if (c.pool_size == 0 || c.sample_size == 0 || c.sample_size > c.pool_size) {
    fail(ErrorCategory::invalid_argument, "search needs 1 <= sample_size <= pool_size");
  }
  if (!(c.mutation_percent > 0.0 && c.mutation_percent <= 100.0)) {
    fail(ErrorCategory::invalid_argument, "mutation_percent must lie in (0, 100]");
  }
  if (!(c.sigma >= 0.0)) fail(ErrorCategory::invalid_argument, "sigma must be non-negative");
  check_zeta(c.zeta_hat_low);
}

struct Candidate {
  AffinePair pair;
  double fitness = 0.0;
  std::size_t age = 0;  // insertion index
};

// Fixed-capacity FIFO: appends until full, then every insertion evicts the
// oldest record.
class CandidatePool {
 public:
  explicit CandidatePool(std::size_t capacity) : capacity_(capacity) {}

  std::size_t size() const noexcept { return records_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const std::deque<Candidate>& records() const noexcept { return records_; }

  // Returns the evicted record's age, if any.
  std::optional<std::size_t> insert(AffinePair pair, double fitness) {
    std::optional<std::size_t> evicted;
    if (records_.size() == capacity_) {
      evicted = records_.front().age;
      records_.pop_front();
    }
    records_.push_back({std::move(pair), fitness, next_age_++});
    return evicted;
  }

  // `count` distinct records chosen uniformly at random.
  std::vector<const Candidate*> sample(std::size_t count, Rng& rng) const {
    std::vector<std::size_t> idx(records_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    count = std::min(count, idx.size());
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<const Candidate*> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(&records_[idx[i]]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<Candidate> records_;
  std::size_t next_age_ = 0;
};

inline double population_std(const std::vector<double>& v) {
  if (v.empty()) fail(ErrorCategory::invalid_argument, "standard deviation of an empty layer");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(v.size()));
}

// Population standard deviation of the squared filter norms of prunable layer
// `ordinal`.
inline double layer_norm_std(const NetworkGraph& g, const ModelParams& weights, std::size_t ordinal) {
  return population_std(filter_norms(g, weights).at(ordinal));
}

inline std::vector<double> layer_norm_stds(const FilterNorms& norms) {
  std::vector<double> out;
  for (const auto& layer : norms) out.push_back(population_std(layer));
  return out;
}

inline std::size_t mutated_layer_count(std::size_t layers, double percent) {
  const auto n = static_cast<std::size_t>(std::llround(percent / 100.0 * static_cast<double>(layers)));
  return std::clamp<std::size_t>(n, 1, layers);
}

// Random walk on a u% subset of layers (at least one):
//   alpha_l *= exp(N(0, sigma^2)),  kappa_l += N(0, std_l^2).
inline AffinePair mutate(const AffinePair& pair, const std::vector<double>& layer_stds, const SearchConfig& config,
                         Rng& rng) {
  const std::size_t L = pair.size();
  if (layer_stds.size() != L) fail(ErrorCategory::invalid_argument, "one norm std per layer required");
  AffinePair out = pair;
  if (L == 0) return out;
  std::vector<std::size_t> layers(L);
  std::iota(layers.begin(), layers.end(), std::size_t{0});
  const std::size_t count = mutated_layer_count(L, config.mutation_percent);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, L - 1);
    std::swap(layers[i], layers[pick(rng)]);
  }
  std::sort(layers.begin(), layers.begin() + static_cast<std::ptrdiff_t>(count));
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t l = layers[i];
    out.alpha[l] *= std::exp(config.sigma * unit(rng));
    out.kappa[l] += layer_stds[l] * unit(rng);
  }
  return out;
}

struct HistoryRow {
  std::size_t iteration = 0;
  double candidate_fitness = 0.0;
  double best_so_far = 0.0;
  double seconds_elapsed = 0.0;
};

struct SearchResult {
  AffinePair best;
  double best_fitness = 0.0;
  std::vector<HistoryRow> history;
  std::size_t evaluations = 0;
  std::vector<Candidate> final_pool;
};

inline constexpr std::string_view kHistoryHeader = "iteration,candidate_fitness,best_so_far,seconds_elapsed";

inline std::string format_history(const std::vector<HistoryRow>& rows) {
  std::ostringstream os;
  os << kHistoryHeader << '\n';
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.3f\n", r.iteration, r.candidate_fitness, r.best_so_far,
                  r.seconds_elapsed);
    os << buf;
  }
  return os.str();
}

// Number of times `regularized_evolution` has run in this process.
inline std::atomic<std::size_t>& search_invocations() {
  static std::atomic<std::size_t> count{0};
  return count;
}

using FitnessFn = std::function<double(const AffinePair&)>;

// Aging evolution over affine pairs. Each iteration starts from the identity
// pair; once the pool holds at least S records the fittest of S sampled
// records replaces it. The mutated candidate is scored and inserted,
// evicting the oldest record when the pool is full.
inline SearchResult regularized_evolution(std::size_t layers, const std::vector<double>& layer_stds,
                                          const SearchConfig& config, const FitnessFn& fitness_of) {
  validate_search_config(config);
  ++search_invocations();
  Rng rng = make_rng(config.seed, "search");
  CandidatePool pool(config.pool_size);
  SearchResult result;
  result.best_fitness = -1.0;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t e = 0; e < config.iterations; ++e) {
    AffinePair parent = AffinePair::identity(layers);
    if (pool.size() >= config.sample_size) {
      const auto picked = pool.sample(config.sample_size, rng);
      const Candidate* best = picked.front();
      for (const auto* c : picked) {
        if (c->fitness > best->fitness) best = c;
      }
      parent = best->pair;
    }
    AffinePair child = mutate(parent, layer_stds, config, rng);
    const double fit = fitness_of(child);
    ++result.evaluations;
    if (fit > result.best_fitness) {
      result.best_fitness = fit;
      result.best = child;
    }
    pool.insert(std::move(child), fit);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back({e, fit, result.best_fitness, secs});
  }
  result.final_pool.assign(pool.records().begin(), pool.records().end());
  return result;
}

struct DataSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Everything a fitness evaluation reads. The pretrained parameters are only
// ever copied.
struct FitnessContext {
  const NetworkGraph* graph = nullptr;
  const ModelParams* pretrained = nullptr;
  const Dataset* train = nullptr;
  const Dataset* val = nullptr;
  TrainConfig finetune;  // learning-rate/momentum/batch settings for the short fine-tune
  FilterNorms norms;

  FitnessContext(const NetworkGraph& g, const ModelParams& p, const Dataset& tr, const Dataset& va, TrainConfig ft)
      : graph(&g), pretrained(&p), train(&tr), val(&va), finetune(std::move(ft)), norms(filter_norms(g, p)) {}
};

// Prune at zeta with the ranking, fine-tune a fresh copy of the pretrained
// weights for `finetune_steps`, and score on the validation split.
inline double fitness(const AffinePair& pair, const FitnessContext& ctx, double zeta, std::size_t finetune_steps) {
  if (ctx.val->empty()) fail(ErrorCategory::empty_dataset, "validation split is empty");
  const FilterMask mask = legr_prune(*ctx.graph, ctx.norms, pair, zeta);
  PrunedModel pruned = apply_mask(*ctx.graph, *ctx.pretrained, mask);
  Network net(std::move(pruned.graph), std::move(pruned.params));
  train_steps(net, *ctx.train, ctx.finetune, finetune_steps);
  return evaluate(net, *ctx.val);
}

inline SearchResult search(const FitnessContext& ctx, const SearchConfig& config) {
  validate_search_config(config);
  check_feasible(*ctx.graph, config.zeta_hat_low);
  const auto stds = layer_norm_stds(ctx.norms);
  return regularized_evolution(ctx.graph->prunable_count(), stds, config, [&](const AffinePair& p) {
    return fitness(p, ctx, config.zeta_hat_low, config.finetune_steps);
  });
}

}  // namespace legr
