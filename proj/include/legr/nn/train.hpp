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
#include <numeric>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "legr/data/dataset.hpp"
#include "legr/error.hpp"
#include "legr/nn/network.hpp"
#include "legr/rng.hpp"
#include "legr/tensor.hpp"

namespace legr {

struct LrStep {
  std::size_t step = 0;
  double multiplier = 1.0;

  friend bool operator==(const LrStep&, const LrStep&) = default;
};

struct TrainConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 5e-4;
  std::size_t batch_size = 32;
  // From `step` on, the learning rate is learning_rate * multiplier (the
  // multiplier is absolute, not compounded).
  std::vector<LrStep> lr_schedule;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline void validate_train_config(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) fail(ErrorCategory::invalid_argument, "learning_rate must be positive");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) fail(ErrorCategory::invalid_argument, "momentum must be in [0,1)");
  if (!(c.weight_decay >= 0.0)) fail(ErrorCategory::invalid_argument, "weight_decay must be non-negative");
  if (c.batch_size == 0) fail(ErrorCategory::invalid_argument, "batch_size must be positive");
  for (std::size_t i = 1; i < c.lr_schedule.size(); ++i) {
    if (c.lr_schedule[i].step <= c.lr_schedule[i - 1].step) {
      fail(ErrorCategory::invalid_argument, "lr_schedule steps must be strictly increasing");
    }
  }
}

inline double learning_rate_at(const TrainConfig& c, std::size_t step_index) {
  double mult = 1.0;
  for (const auto& s : c.lr_schedule) {
    if (s.step <= step_index) mult = s.multiplier;
  }
  return c.learning_rate * mult;
}

// Step-based rendering of an epoch schedule: drops at the given fractions of
// the total step budget, each multiplying the rate by `factor`.
inline std::vector<LrStep> fractional_drops(std::size_t total_steps, std::vector<double> fractions, double factor) {
  std::vector<LrStep> out;
  double mult = 1.0;
  for (double f : fractions) {
    mult *= factor;
    auto step = static_cast<std::size_t>(f * static_cast<double>(total_steps));
    if (!out.empty() && step <= out.back().step) continue;
    out.push_back({step, mult});
  }
  return out;
}

namespace detail {

inline void sgd_update(TensorGrid& value, TensorGrid& grad, TensorGrid& velocity, const TrainConfig& c, double lr) {
  const double mu = c.momentum, wd = c.weight_decay;
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i] + wd * value[i];
    velocity[i] = mu * velocity[i] + g;
    const double step = c.nesterov ? g + mu * velocity[i] : velocity[i];
    value[i] -= lr * step;
    grad[i] = 0.0;
  }
}

}  // namespace detail

// One SGD update with (optionally Nesterov) momentum and L2 weight decay:
//   v <- mu*v + (g + wd*w);   w <- w - lr*(g + wd*w + mu*v)  (Nesterov)
//                             w <- w - lr*v                  (classical)
// Gradients are zeroed afterwards.
inline void sgd_step(ModelParams& params, const TrainConfig& config, std::size_t step_index) {
  const double lr = learning_rate_at(config, step_index);
  for (auto& p : params) {
    if (!p.has_params()) continue;
    detail::sgd_update(p.weights, p.weight_grad, p.weight_momentum, config, lr);
    if (p.bias) detail::sgd_update(*p.bias, p.bias_grad, p.bias_momentum, config, lr);
  }
}

// Endless seeded minibatch stream; reshuffles at every epoch boundary.
class BatchStream {
 public:
  BatchStream(const Dataset& data, std::size_t batch_size, std::uint64_t seed)
      : data_(&data), batch_(std::min(batch_size, data.size())), rng_(seed) {
    if (data.empty()) fail(ErrorCategory::empty_dataset, "cannot draw batches from an empty dataset");
    order_.resize(data.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  Dataset next() {
    std::vector<std::size_t> idx;
    idx.reserve(batch_);
    while (idx.size() < batch_) {
      if (cursor_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
      }
      idx.push_back(order_[cursor_++]);
    }
    return subset(*data_, idx);
  }

 private:
  const Dataset* data_;
  std::size_t batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

struct TrainResult {
  std::optional<double> final_loss;  // loss of the last step's batch, if any step ran
  std::size_t steps = 0;
};

// Exactly `n_steps` updates; step indices (for the schedule) start at
// `first_step`. Data order is fixed by config.seed.
inline TrainResult train_steps(Network& model, const Dataset& data, const TrainConfig& config, std::size_t n_steps,
                               std::size_t first_step = 0) {
  validate_train_config(config);
  if (data.empty()) fail(ErrorCategory::empty_dataset, "training set is empty");
  TrainResult result;
  if (n_steps == 0) return result;
  BatchStream stream(data, config.batch_size, config.seed);
  model.zero_grad();
  for (std::size_t s = 0; s < n_steps; ++s) {
    Dataset batch = stream.next();
    result.final_loss = model.forward(batch.images, batch.labels);
    model.backward();
    sgd_step(model.params(), config, first_step + s);
  }
  result.steps = n_steps;
  return result;
}

// Anything that maps an NCHW batch to [N, classes, ...] scores.
template <typename Model>
concept Classifier = requires(const Model& m, const TensorGrid& x) {
  { m.logits(x) } -> std::convertible_to<TensorGrid>;
};

inline std::vector<int> argmax_rows(const TensorGrid& scores) {
  const std::size_t N = scores.dim(0), K = scores.size() / N;
  std::vector<int> out(N);
  for (std::size_t n = 0; n < N; ++n) {
    const double* row = scores.data() + n * K;
    out[n] = static_cast<int>(std::max_element(row, row + K) - row);
  }
  return out;
}

// Fraction of argmax-correct predictions.
template <Classifier Model>
double evaluate(const Model& model, const Dataset& data, std::size_t batch_size = 256) {
  validate_dataset(data);
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const std::size_t end = std::min(data.size(), begin + batch_size);
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Dataset batch = subset(data, idx);
    const TensorGrid scores = model.logits(batch.images);
    const std::size_t classes = scores.size() / scores.dim(0);
    if (data.class_count > classes) {
      fail(ErrorCategory::label_range, "dataset has " + std::to_string(data.class_count) + " classes, model scores " +
                                           std::to_string(classes));
    }
    const auto pred = argmax_rows(scores);
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace legr
