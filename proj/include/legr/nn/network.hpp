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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "legr/archgraph/graph.hpp"
#include "legr/error.hpp"
#include "legr/nn/ops.hpp"
#include "legr/nn/params.hpp"
#include "legr/rng.hpp"
#include "legr/tensor.hpp"

namespace legr {

// A NetworkGraph plus its parameters, with a layer-granular reverse-mode
// tape. forward() records the activations; backward() replays them in reverse
// and accumulates parameter gradients, then drops the tape.
class Network {
 public:
  Network(NetworkGraph graph, ModelParams params) : graph_(std::move(graph)), params_(std::move(params)) {
    validate_params(graph_, params_);
    for (auto& p : params_) p.reset_state();
    index_last_use();
  }

  Network(NetworkGraph graph, Rng& init_rng) : graph_(std::move(graph)) {
    params_ = init_params(graph_, init_rng);
    index_last_use();
  }

  const NetworkGraph& graph() const noexcept { return graph_; }
  const ModelParams& params() const noexcept { return params_; }
  ModelParams& params() noexcept { return params_; }

  // Logits [N, classes, 1, 1] without recording.
  TensorGrid logits(const TensorGrid& input) const {
    check_input(input);
    std::vector<TensorGrid> acts(graph_.size());
    acts[0] = input;
    const std::size_t last = graph_.node(graph_.loss_node()).preds[0];
    for (std::size_t i = 1; i <= last; ++i) {
      acts[i] = eval_node(i, acts, nullptr);
      // Release activations no later node reads.
      for (auto p : graph_.node(i).preds) {
        if (last_use_[p] == i && p != 0) acts[p] = TensorGrid();
      }
    }
    return std::move(acts[last]);
  }

  // Mean softmax cross-entropy of the batch; records the tape.
  double forward(const TensorGrid& input, std::span<const int> labels) {
    check_input(input);
    Tape tape;
    tape.acts.resize(graph_.size());
    tape.pool_index.resize(graph_.size());
    tape.acts[0] = input;
    const std::size_t loss = graph_.loss_node();
    for (std::size_t i = 1; i < loss; ++i) tape.acts[i] = eval_node(i, tape.acts, &tape.pool_index[i]);
    const auto& logits = tape.acts[graph_.node(loss).preds[0]];
    tape.loss = ops::softmax_ce_forward(logits, labels, &tape.probs);
    tape.labels.assign(labels.begin(), labels.end());
    tape_ = std::move(tape);
    return tape_->loss;
  }

  // Accumulates d(loss_scale * loss)/d(param) into every parameter gradient.
  // With `want_input_grad`, input_grad() holds the gradient w.r.t. the input.
  void backward(double loss_scale = 1.0, bool want_input_grad = false) {
    if (!tape_) fail(ErrorCategory::state, "backward called without a recorded forward pass");
    Tape& t = *tape_;
    const std::size_t loss = graph_.loss_node();
    std::vector<std::optional<TensorGrid>> grads(graph_.size());
    const std::size_t logits_node = graph_.node(loss).preds[0];
    grads[logits_node] = ops::softmax_ce_backward(t.acts[logits_node].shape(), t.probs, t.labels, loss_scale);
    auto accumulate = [&](std::size_t node, TensorGrid g) {
      if (!grads[node]) {
        grads[node] = std::move(g);
      } else {
        auto& dst = *grads[node];
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g[k];
      }
    };
    for (std::size_t i = loss; i-- > 1;) {
      if (!grads[i]) continue;
      const Node& n = graph_.node(i);
      const TensorGrid& gy = *grads[i];
      const std::size_t p0 = n.preds[0];
      const bool need_in = p0 != 0 || want_input_grad;
      const TensorGrid& x = t.acts[p0];
      LayerParams& prm = params_[i];
      switch (n.spec.kind) {
        case LayerKind::conv:
        case LayerKind::depthwise: {
          TensorGrid gx;
          ops::conv2d_backward(x, prm, gy, n.spec.stride, n.spec.pad, n.spec.kind == LayerKind::depthwise,
                               need_in ? &gx : nullptr, n.spec.name);
          if (need_in) accumulate(p0, std::move(gx));
          break;
        }
        case LayerKind::dense: {
          TensorGrid gx;
          ops::dense_backward(x, prm, gy, need_in ? &gx : nullptr);
          if (need_in) accumulate(p0, std::move(gx));
          break;
        }
        case LayerKind::relu: accumulate(p0, ops::relu_backward(x, gy)); break;
        case LayerKind::maxpool: accumulate(p0, ops::maxpool_backward(x.shape(), t.pool_index[i], gy)); break;
        case LayerKind::gap: accumulate(p0, ops::gap_backward(x.shape(), gy)); break;
        case LayerKind::scale_shift: accumulate(p0, ops::scale_shift_backward(x, prm, gy)); break;
        case LayerKind::add:
          for (auto p : n.preds) accumulate(p, gy);
          break;
        case LayerKind::input:
        case LayerKind::softmax_ce:
          break;
      }
      grads[i].reset();
      t.acts[i] = TensorGrid();
    }
    input_grad_ = want_input_grad && grads[0] ? std::move(*grads[0]) : TensorGrid();
    tape_.reset();
  }

  bool has_tape() const noexcept { return tape_.has_value(); }
  const TensorGrid& input_grad() const noexcept { return input_grad_; }

  void zero_grad() {
    for (auto& p : params_) {
      if (p.has_params()) p.zero_grad();
    }
  }

 private:
  struct Tape {
    std::vector<TensorGrid> acts;
    std::vector<std::vector<std::size_t>> pool_index;
    TensorGrid probs;
    std::vector<int> labels;
    double loss = 0.0;
  };

  void check_input(const TensorGrid& input) const {
    const auto& a = graph_.arch();
    if (input.rank() != 4 || input.dim(1) != a.in_channels || input.dim(2) != a.in_height || input.dim(3) != a.in_width) {
      fail(ErrorCategory::shape_mismatch, "network input: expected [N," + std::to_string(a.in_channels) + "," +
                                              std::to_string(a.in_height) + "," + std::to_string(a.in_width) +
                                              "], got " + shape_string(input.shape()));
    }
  }

  void index_last_use() {
    last_use_.assign(graph_.size(), 0);
    for (std::size_t i = 0; i < graph_.size(); ++i) {
      for (auto p : graph_.node(i).preds) last_use_[p] = i;
    }
  }

  TensorGrid eval_node(std::size_t i, const std::vector<TensorGrid>& acts, std::vector<std::size_t>* pool_index) const {
    const Node& n = graph_.node(i);
    const TensorGrid& x = acts[n.preds[0]];
    switch (n.spec.kind) {
      case LayerKind::conv:
      case LayerKind::depthwise:
        return ops::conv2d_forward(x, params_[i], n.spec.stride, n.spec.pad, n.spec.kind == LayerKind::depthwise,
                                   n.spec.name);
      case LayerKind::dense: return ops::dense_forward(x, params_[i]);
      case LayerKind::relu: return ops::relu_forward(x);
      case LayerKind::maxpool: return ops::maxpool_forward(x, pool_index);
      case LayerKind::gap: return ops::gap_forward(x);
      case LayerKind::scale_shift: return ops::scale_shift_forward(x, params_[i]);
      case LayerKind::add: {
        TensorGrid y = x;
        for (std::size_t k = 1; k < n.preds.size(); ++k) {
          const auto& o = acts[n.preds[k]];
          for (std::size_t j = 0; j < y.size(); ++j) y[j] += o[j];
        }
        return y;
      }
      case LayerKind::input:
      case LayerKind::softmax_ce:
        break;
    }
    fail(ErrorCategory::state, "node '" + n.spec.name + "' cannot be evaluated directly");
  }

  NetworkGraph graph_;
  ModelParams params_;
  std::optional<Tape> tape_;
  TensorGrid input_grad_;
  std::vector<std::size_t> last_use_;
};

}  // namespace legr
