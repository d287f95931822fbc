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

// Shared fixtures and independent reference implementations for the test
// suites. Nothing here calls into the kernels under test.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "legr/archgraph/graph.hpp"
#include "legr/archgraph/mask.hpp"
#include "legr/nn/params.hpp"
#include "legr/rng.hpp"
#include "legr/tensor.hpp"

namespace legr::testing {

inline TensorGrid random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  TensorGrid t(shape);
  std::normal_distribution<double> d(0.0, scale);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

// Seven nested loops over (n, oc, oy, ox, ic, ky, kx) with explicit bounds
// checks for padding.
inline TensorGrid naive_conv(const TensorGrid& x, const TensorGrid& w, const TensorGrid* bias, std::size_t stride,
                             std::size_t pad, bool depthwise, std::uint64_t* macs = nullptr) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), k = w.dim(2);
  const std::size_t OH = (H + 2 * pad - k) / stride + 1, OW = (W + 2 * pad - k) / stride + 1;
  TensorGrid y({N, O, OH, OW});
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t o = 0; o < O; ++o) {
      for (std::size_t oy = 0; oy < OH; ++oy) {
        for (std::size_t ox = 0; ox < OW; ++ox) {
          double acc = bias ? (*bias)[o] : 0.0;
          const std::size_t c_lo = depthwise ? o : 0, c_hi = depthwise ? o + 1 : C;
          for (std::size_t c = c_lo; c < c_hi; ++c) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                double v = 0.0;  // padding
                if (iy >= 0 && ix >= 0 && iy < static_cast<long>(H) && ix < static_cast<long>(W)) {
                  v = x.at(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                }
                const double wv = depthwise ? w.at(o, 0, ky, kx) : w.at(o, c, ky, kx);
                acc += wv * v;
                if (macs) ++*macs;
              }
            }
          }
          y.at(n, o, oy, ox) = acc;
        }
      }
    }
  }
  return y;
}

// Keep bits of every node's output channels under `mask` (all kept outside
// prunable spaces).
inline std::vector<std::vector<bool>> node_keep(const NetworkGraph& g, const FilterMask* mask) {
  std::vector<std::vector<bool>> keep;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& sp = g.space(g.node(i).space);
    if (mask && sp.prunable) {
      keep.push_back(mask->keep[sp.prunable_layers.front()]);
    } else {
      keep.emplace_back(g.node(i).out_channels, true);
    }
  }
  return keep;
}

// Reference forward pass over a whole graph with a multiply counter on conv,
// depthwise and dense layers. With a mask, multiplies touching a pruned input
// or output channel are skipped and pruned outputs are zero. Returns the
// logits.
inline TensorGrid naive_forward(const NetworkGraph& g, const ModelParams& params, const TensorGrid& input,
                                std::uint64_t* macs = nullptr, const FilterMask* mask = nullptr) {
  const auto keep = node_keep(g, mask);
  std::vector<TensorGrid> acts(g.size());
  acts[0] = input;
  const std::size_t N = input.dim(0);
  for (std::size_t i = 1; i < g.loss_node(); ++i) {
    const Node& n = g.node(i);
    const TensorGrid& x = acts[n.preds[0]];
    const auto& p = params[i];
    switch (n.spec.kind) {
      case LayerKind::conv:
      case LayerKind::depthwise: {
        const bool dw = n.spec.kind == LayerKind::depthwise;
        const auto& kin = keep[n.preds[0]];
        const auto& kout = keep[i];
        const std::size_t k = n.spec.k, s = n.spec.stride, pad = n.spec.pad;
        TensorGrid y({N, n.out_channels, n.out_height, n.out_width});
        for (std::size_t b = 0; b < N; ++b)
          for (std::size_t o = 0; o < n.out_channels; ++o) {
            if (!kout[o]) continue;
            for (std::size_t oy = 0; oy < n.out_height; ++oy)
              for (std::size_t ox = 0; ox < n.out_width; ++ox) {
                double acc = (*p.bias)[o];
                for (std::size_t c = dw ? o : 0; c < (dw ? o + 1 : n.in_channels); ++c) {
                  if (!kin[c]) continue;
                  for (std::size_t ky = 0; ky < k; ++ky)
                    for (std::size_t kx = 0; kx < k; ++kx) {
                      const long iy = static_cast<long>(oy * s + ky) - static_cast<long>(pad);
                      const long ix = static_cast<long>(ox * s + kx) - static_cast<long>(pad);
                      double v = 0.0;
                      if (iy >= 0 && ix >= 0 && iy < static_cast<long>(n.in_height) && ix < static_cast<long>(n.in_width)) {
                        v = x.at(b, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                      }
                      acc += (dw ? p.weights.at(o, 0, ky, kx) : p.weights.at(o, c, ky, kx)) * v;
                      if (macs) ++*macs;
                    }
                }
                y.at(b, o, oy, ox) = acc;
              }
          }
        acts[i] = y;
        break;
      }
      case LayerKind::dense: {
        const std::size_t F = x.size() / N, O = p.weights.dim(0);
        const std::size_t plane = F / n.in_channels;
        const auto& kin = keep[n.preds[0]];
        TensorGrid y({N, O, 1, 1});
        for (std::size_t s = 0; s < N; ++s) {
          for (std::size_t o = 0; o < O; ++o) {
            double acc = (*p.bias)[o];
            for (std::size_t f = 0; f < F; ++f) {
              if (!kin[f / plane]) continue;
              acc += p.weights[o * F + f] * x[s * F + f];
              if (macs) ++*macs;
            }
            y[s * O + o] = acc;
          }
        }
        acts[i] = y;
        break;
      }
      case LayerKind::relu: {
        TensorGrid y = x;
        for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
        acts[i] = y;
        break;
      }
      case LayerKind::maxpool: {
        const std::size_t C = x.dim(1), OH = x.dim(2) / 2, OW = x.dim(3) / 2;
        TensorGrid y({N, C, OH, OW});
        for (std::size_t s = 0; s < N; ++s)
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t oy = 0; oy < OH; ++oy)
              for (std::size_t ox = 0; ox < OW; ++ox)
                y.at(s, c, oy, ox) = std::max(std::max(x.at(s, c, 2 * oy, 2 * ox), x.at(s, c, 2 * oy, 2 * ox + 1)),
                                              std::max(x.at(s, c, 2 * oy + 1, 2 * ox), x.at(s, c, 2 * oy + 1, 2 * ox + 1)));
        acts[i] = y;
        break;
      }
      case LayerKind::gap: {
        const std::size_t C = x.dim(1), P = x.dim(2) * x.dim(3);
        TensorGrid y({N, C, 1, 1});
        for (std::size_t s = 0; s < N * C; ++s) {
          double acc = 0.0;
          for (std::size_t j = 0; j < P; ++j) acc += x[s * P + j];
          y[s] = acc / static_cast<double>(P);
        }
        acts[i] = y;
        break;
      }
      case LayerKind::scale_shift: {
        const std::size_t C = x.dim(1), P = x.dim(2) * x.dim(3);
        TensorGrid y = x;
        for (std::size_t s = 0; s < N; ++s)
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t j = 0; j < P; ++j) {
              double& v = y[(s * C + c) * P + j];
              v = keep[i][c] ? v * p.weights[c] + (*p.bias)[c] : 0.0;
            }
        acts[i] = y;
        break;
      }
      case LayerKind::add: {
        TensorGrid y = x;
        for (std::size_t q = 1; q < n.preds.size(); ++q) {
          for (std::size_t j = 0; j < y.size(); ++j) y[j] += acts[n.preds[q]][j];
        }
        acts[i] = y;
        break;
      }
      default:
        break;
    }
  }
  return acts[g.node(g.loss_node()).preds[0]];
}

struct RandomGraphOptions {
  bool residual = true;
  bool depthwise = true;
  bool pooling = true;
  std::size_t max_blocks = 4;
};

// Small random architecture: a stem conv, then a mix of plain convs,
// residual blocks, depthwise-separable blocks, pooling and scale_shift, then
// an optional gap, a dense classifier and the loss.
inline ArchSpec random_arch(Rng& rng, const RandomGraphOptions& opt = {}) {
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  ArchSpec a;
  a.name = "random";
  a.in_channels = pick(1, 3);
  a.in_height = a.in_width = pick(6, 10);
  std::size_t h = a.in_height, c = 0;
  std::string prev(kInputName);
  int id = 0;
  auto add = [&](LayerKind kind, std::vector<std::string> inputs, std::size_t k = 1, std::size_t stride = 1,
                 std::size_t pad = 0, std::size_t out = 0) {
    LayerSpec l;
    l.name = std::string(kind_name(kind)) + std::to_string(id++);
    l.kind = kind;
    l.k = k;
    l.stride = stride;
    l.pad = pad;
    l.out_channels = out;
    l.inputs = std::move(inputs);
    a.layers.push_back(l);
    prev = l.name;
    return l.name;
  };
  auto conv = [&](std::size_t out) {
    const std::size_t k = pick(0, 2) == 0 ? 1 : 3;
    const std::size_t pad = k == 3 ? pick(0, 1) : 0;
    const std::size_t stride = (h >= 6 && pick(0, 3) == 0) ? 2 : 1;
    if (h + 2 * pad < k) return;
    add(LayerKind::conv, {prev}, k, stride, pad, out);
    h = (h + 2 * pad - k) / stride + 1;
    c = out;
  };
  conv(pick(2, 6));
  add(LayerKind::relu, {prev});
  const std::size_t blocks = pick(1, opt.max_blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t choice = pick(0, 4);
    if (choice == 0 && opt.residual) {
      const std::string skip = prev;
      add(LayerKind::conv, {prev}, 3, 1, 1, c);
      add(LayerKind::relu, {prev});
      const std::string body = add(LayerKind::conv, {prev}, 3, 1, 1, c);
      add(LayerKind::add, {body, skip});
      add(LayerKind::relu, {prev});
    } else if (choice == 1 && opt.depthwise) {
      add(LayerKind::depthwise, {prev}, 3, 1, 1);
      add(LayerKind::relu, {prev});
      conv(pick(2, 6));
    } else if (choice == 2 && opt.pooling && h >= 4) {
      add(LayerKind::maxpool, {prev});
      h /= 2;
    } else if (choice == 3) {
      add(LayerKind::scale_shift, {prev});
    } else {
      conv(pick(2, 6));
      add(LayerKind::relu, {prev});
    }
  }
  if (pick(0, 1) == 0) add(LayerKind::gap, {prev});
  add(LayerKind::dense, {prev}, 1, 1, 0, pick(2, 4));
  add(LayerKind::softmax_ce, {prev});
  return a;
}

// Random structurally valid mask: one random keep bit per coupling group,
// then at least one channel forced on per prunable space.
inline FilterMask random_mask(const NetworkGraph& g, Rng& rng, double keep_prob = 0.6) {
  std::bernoulli_distribution keep(keep_prob);
  std::vector<bool> bits(g.coupling_groups().size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = keep(rng);
  for (std::size_t s = 0; s < g.spaces().size(); ++s) {
    if (!g.space(s).prunable) continue;
    bool any = false;
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (g.coupling_groups()[i].space == s) any = any || bits[i];
    }
    if (!any) {
      const std::size_t c = std::uniform_int_distribution<std::size_t>(0, g.space(s).channels - 1)(rng);
      for (std::size_t i = 0; i < bits.size(); ++i) {
        if (g.coupling_groups()[i].space == s && g.coupling_groups()[i].channel == c) bits[i] = true;
      }
    }
  }
  return mask_from_groups(g, bits);
}

// Squared filter norms by direct summation over the raw weight tensor.
inline std::vector<std::vector<double>> direct_norms(const NetworkGraph& g, const ModelParams& params) {
  std::vector<std::vector<double>> out;
  for (auto node : g.prunable_layers()) {
    const auto& w = params[node].weights;
    const std::size_t per = w.size() / w.dim(0);
    std::vector<double> layer;
    for (std::size_t f = 0; f < w.dim(0); ++f) {
      double s = 0.0;
      for (std::size_t j = 0; j < per; ++j) s += w[f * per + j] * w[f * per + j];
      layer.push_back(s);
    }
    out.push_back(layer);
  }
  return out;
}

}  // namespace legr::testing
