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
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <cblas.h>

#include "legr/error.hpp"
#include "legr/nn/params.hpp"
#include "legr/tensor.hpp"

// Direct-loop kernels for the fixed layer vocabulary. All tensors are NCHW.
namespace legr::ops {

namespace detail {

struct ConvGeometry {
  std::size_t batch, in_c, in_h, in_w, out_c, out_h, out_w, k, stride, pad;
  bool depthwise;
};

// Half-open range of output positions whose input tap (o*stride + tap - pad)
// lands inside [0, extent).
inline void valid_range(std::size_t tap, std::size_t stride, std::size_t pad, std::size_t extent,
                        std::size_t out_extent, std::size_t& lo, std::size_t& hi) {
  const long t = static_cast<long>(tap) - static_cast<long>(pad);
  const long s = static_cast<long>(stride);
  long l = t >= 0 ? 0 : (-t + s - 1) / s;
  long h = (static_cast<long>(extent) - 1 - t);
  h = h < 0 ? 0 : h / s + 1;
  lo = static_cast<std::size_t>(std::max(0L, l));
  hi = static_cast<std::size_t>(std::clamp(h, 0L, static_cast<long>(out_extent)));
  if (lo > hi) lo = hi;
}

inline ConvGeometry conv_geometry(const TensorGrid& input, const LayerParams& p, std::size_t stride, std::size_t pad,
                                  bool depthwise, std::string_view layer) {
  auto mismatch = [&](const std::string& what) {
    fail(ErrorCategory::shape_mismatch, "layer '" + std::string(layer) + "': " + what);
  };
  if (input.rank() != 4) mismatch("expected NCHW input, got " + shape_string(input.shape()));
  if (p.weights.rank() != 4 || p.weights.dim(2) != p.weights.dim(3)) {
    mismatch("expected square [out,in,k,k] weights, got " + shape_string(p.weights.shape()));
  }
  if (stride < 1) mismatch("stride must be >= 1");
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_c = input.dim(1);
  g.in_h = input.dim(2);
  g.in_w = input.dim(3);
  g.k = p.weights.dim(2);
  g.stride = stride;
  g.pad = pad;
  g.depthwise = depthwise;
  g.out_c = p.weights.dim(0);
  const std::size_t expect_in = depthwise ? 1 : g.in_c;
  if (p.weights.dim(1) != expect_in || (depthwise && g.out_c != g.in_c)) {
    mismatch("weights " + shape_string(p.weights.shape()) + " do not fit input " + shape_string(input.shape()) +
             (depthwise ? " (depthwise)" : ""));
  }
  if (p.bias && p.bias->size() != g.out_c) mismatch("bias length does not match output channels");
  if (g.in_h + 2 * pad < g.k || g.in_w + 2 * pad < g.k) mismatch("kernel larger than padded input");
  g.out_h = (g.in_h + 2 * pad - g.k) / stride + 1;
  g.out_w = (g.in_w + 2 * pad - g.k) / stride + 1;
  return g;
}

// Visits every in-bounds (output row segment, input row segment, weight tap)
// triple of one plane pair: `fn(out_offset, in_offset, tap, count)`. The input
// advances by `stride` per output along the segment.
template <typename Fn>
void for_each_tap(const ConvGeometry& g, Fn&& fn) {
  for (std::size_t ky = 0; ky < g.k; ++ky) {
    std::size_t y_lo, y_hi;
    valid_range(ky, g.stride, g.pad, g.in_h, g.out_h, y_lo, y_hi);
    for (std::size_t kx = 0; kx < g.k; ++kx) {
      std::size_t x_lo, x_hi;
      valid_range(kx, g.stride, g.pad, g.in_w, g.out_w, x_lo, x_hi);
      if (x_lo >= x_hi) continue;
      for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
        const std::size_t iy = oy * g.stride + ky - g.pad;
        const std::size_t ix0 = x_lo * g.stride + kx - g.pad;
        fn(oy * g.out_w + x_lo, iy * g.in_w + ix0, ky * g.k + kx, x_hi - x_lo);
      }
    }
  }
}

// Unfolds one input sample into a [in_c * k * k, out_h * out_w] matrix;
// taps that fall in the padding stay zero.
inline void im2col(const double* in, const ConvGeometry& g, double* col) {
  const std::size_t in_plane = g.in_h * g.in_w, out_plane = g.out_h * g.out_w, kk = g.k * g.k;
  std::fill(col, col + g.in_c * kk * out_plane, 0.0);
  const std::size_t s = g.stride;
  for (std::size_t ic = 0; ic < g.in_c; ++ic) {
    const double* plane = in + ic * in_plane;
    double* rows = col + ic * kk * out_plane;
    for_each_tap(g, [&](std::size_t oo, std::size_t ii, std::size_t tap, std::size_t count) {
      double* dst = rows + tap * out_plane + oo;
      const double* src = plane + ii;
      for (std::size_t j = 0; j < count; ++j) dst[j] = src[j * s];
    });
  }
}

inline void col2im_add(const double* col, const ConvGeometry& g, double* in_grad) {
  const std::size_t in_plane = g.in_h * g.in_w, out_plane = g.out_h * g.out_w, kk = g.k * g.k;
  const std::size_t s = g.stride;
  for (std::size_t ic = 0; ic < g.in_c; ++ic) {
    double* plane = in_grad + ic * in_plane;
    const double* rows = col + ic * kk * out_plane;
    for_each_tap(g, [&](std::size_t oo, std::size_t ii, std::size_t tap, std::size_t count) {
      const double* src = rows + tap * out_plane + oo;
      double* dst = plane + ii;
      for (std::size_t j = 0; j < count; ++j) dst[j * s] += src[j];
    });
  }
}

}  // namespace detail

// Dense convolutions run as im2col + GEMM per sample; depthwise ones as
// direct loops.
inline TensorGrid conv2d_forward(const TensorGrid& input, const LayerParams& params, std::size_t stride,
                                 std::size_t pad, bool depthwise, std::string_view layer = "conv") {
  const auto g = detail::conv_geometry(input, params, stride, pad, depthwise, layer);
  TensorGrid out({g.batch, g.out_c, g.out_h, g.out_w});
  const std::size_t in_plane = g.in_h * g.in_w, out_plane = g.out_h * g.out_w, kk = g.k * g.k;
  const double* w = params.weights.data();
  const std::size_t s = g.stride;
  if (!depthwise) {
    const std::size_t K = g.in_c * kk;
    std::vector<double> col(K * out_plane);
    for (std::size_t n = 0; n < g.batch; ++n) {
      detail::im2col(input.data() + n * g.in_c * in_plane, g, col.data());
      double* o = out.data() + n * g.out_c * out_plane;
      cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(g.out_c), static_cast<int>(out_plane),
                  static_cast<int>(K), 1.0, w, static_cast<int>(K), col.data(), static_cast<int>(out_plane), 0.0, o,
                  static_cast<int>(out_plane));
      if (params.bias) {
        for (std::size_t oc = 0; oc < g.out_c; ++oc) {
          const double b = (*params.bias)[oc];
          for (std::size_t j = 0; j < out_plane; ++j) o[oc * out_plane + j] += b;
        }
      }
    }
    return out;
  }
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oc = 0; oc < g.out_c; ++oc) {
      double* o = out.data() + (n * g.out_c + oc) * out_plane;
      if (params.bias) std::fill(o, o + out_plane, (*params.bias)[oc]);
      const double* in = input.data() + (n * g.in_c + oc) * in_plane;
      const double* wk = w + oc * kk;
      detail::for_each_tap(g, [&](std::size_t oo, std::size_t ii, std::size_t wi, std::size_t count) {
        const double wv = wk[wi];
        double* orow = o + oo;
        const double* irow = in + ii;
        for (std::size_t j = 0; j < count; ++j) orow[j] += wv * irow[j * s];
      });
    }
  }
  return out;
}

// Accumulates weight/bias gradients into `params` and, when `input_grad` is
// non-null, writes the gradient with respect to the input.
inline void conv2d_backward(const TensorGrid& input, LayerParams& params, const TensorGrid& out_grad,
                            std::size_t stride, std::size_t pad, bool depthwise, TensorGrid* input_grad,
                            std::string_view layer = "conv") {
  const auto g = detail::conv_geometry(input, params, stride, pad, depthwise, layer);
  if (out_grad.shape() != Shape{g.batch, g.out_c, g.out_h, g.out_w}) {
    fail(ErrorCategory::shape_mismatch, "layer '" + std::string(layer) + "': output gradient shape " +
                                            shape_string(out_grad.shape()) + " does not match forward output");
  }
  if (input_grad) *input_grad = TensorGrid(input.shape());
  const std::size_t in_plane = g.in_h * g.in_w, out_plane = g.out_h * g.out_w, kk = g.k * g.k;
  const double* w = params.weights.data();
  double* gw = params.weight_grad.data();
  const std::size_t s = g.stride;
  if (params.bias) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t oc = 0; oc < g.out_c; ++oc) {
        const double* go = out_grad.data() + (n * g.out_c + oc) * out_plane;
        double acc = 0.0;
        for (std::size_t j = 0; j < out_plane; ++j) acc += go[j];
        params.bias_grad[oc] += acc;
      }
    }
  }
  if (!depthwise) {
    const std::size_t K = g.in_c * kk;
    std::vector<double> col(K * out_plane), gcol(input_grad ? K * out_plane : 0);
    for (std::size_t n = 0; n < g.batch; ++n) {
      detail::im2col(input.data() + n * g.in_c * in_plane, g, col.data());
      const double* go = out_grad.data() + n * g.out_c * out_plane;
      cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(g.out_c), static_cast<int>(K),
                  static_cast<int>(out_plane), 1.0, go, static_cast<int>(out_plane), col.data(),
                  static_cast<int>(out_plane), 1.0, gw, static_cast<int>(K));
      if (input_grad) {
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(K), static_cast<int>(out_plane),
                    static_cast<int>(g.out_c), 1.0, w, static_cast<int>(K), go, static_cast<int>(out_plane), 0.0,
                    gcol.data(), static_cast<int>(out_plane));
        detail::col2im_add(gcol.data(), g, input_grad->data() + n * g.in_c * in_plane);
      }
    }
    return;
  }
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oc = 0; oc < g.out_c; ++oc) {
      const double* go = out_grad.data() + (n * g.out_c + oc) * out_plane;
      const double* in = input.data() + (n * g.in_c + oc) * in_plane;
      double* gi = input_grad ? input_grad->data() + (n * g.in_c + oc) * in_plane : nullptr;
      const std::size_t wbase = oc * kk;
      detail::for_each_tap(g, [&](std::size_t oo, std::size_t ii, std::size_t wi, std::size_t count) {
        const double* gorow = go + oo;
        const double* irow = in + ii;
        double acc = 0.0;
        for (std::size_t j = 0; j < count; ++j) acc += gorow[j] * irow[j * s];
        gw[wbase + wi] += acc;
        if (gi) {
          const double wv = w[wbase + wi];
          double* girow = gi + ii;
          for (std::size_t j = 0; j < count; ++j) girow[j * s] += wv * gorow[j];
        }
      });
    }
  }
}

inline TensorGrid dense_forward(const TensorGrid& input, const LayerParams& params) {
  const std::size_t batch = input.dim(0), in_f = input.size() / batch, out_f = params.weights.dim(0);
  if (params.weights.dim(1) != in_f) {
    fail(ErrorCategory::shape_mismatch, "dense: weights " + shape_string(params.weights.shape()) +
                                            " do not fit input " + shape_string(input.shape()));
  }
  TensorGrid out({batch, out_f, 1, 1});
  for (std::size_t n = 0; n < batch; ++n) {
    const double* x = input.data() + n * in_f;
    for (std::size_t o = 0; o < out_f; ++o) {
      const double* w = params.weights.data() + o * in_f;
      double acc = params.bias ? (*params.bias)[o] : 0.0;
      for (std::size_t f = 0; f < in_f; ++f) acc += w[f] * x[f];
      out[n * out_f + o] = acc;
    }
  }
  return out;
}

inline void dense_backward(const TensorGrid& input, LayerParams& params, const TensorGrid& out_grad,
                           TensorGrid* input_grad) {
  const std::size_t batch = input.dim(0), in_f = input.size() / batch, out_f = params.weights.dim(0);
  if (input_grad) *input_grad = TensorGrid(input.shape());
  for (std::size_t n = 0; n < batch; ++n) {
    const double* x = input.data() + n * in_f;
    for (std::size_t o = 0; o < out_f; ++o) {
      const double go = out_grad[n * out_f + o];
      if (params.bias) params.bias_grad[o] += go;
      double* gw = params.weight_grad.data() + o * in_f;
      for (std::size_t f = 0; f < in_f; ++f) gw[f] += go * x[f];
      if (input_grad) {
        const double* w = params.weights.data() + o * in_f;
        double* gi = input_grad->data() + n * in_f;
        for (std::size_t f = 0; f < in_f; ++f) gi[f] += go * w[f];
      }
    }
  }
}

inline TensorGrid relu_forward(const TensorGrid& x) {
  TensorGrid y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

inline TensorGrid relu_backward(const TensorGrid& x, const TensorGrid& gy) {
  TensorGrid gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
  return gx;
}

// 2x2 window, stride 2. `argmax` receives the flat input index chosen for each
// output element (first maximum on ties).
inline TensorGrid maxpool_forward(const TensorGrid& x, std::vector<std::size_t>* argmax) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3), OH = H / 2, OW = W / 2;
  TensorGrid y({N, C, OH, OW});
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const std::size_t base = nc * H * W;
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox, ++o) {
        std::size_t best = base + (2 * oy) * W + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * oy + dy) * W + 2 * ox + dx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        y[o] = x[best];
        if (argmax) (*argmax)[o] = best;
      }
    }
  }
  return y;
}

inline TensorGrid maxpool_backward(const Shape& in_shape, const std::vector<std::size_t>& argmax,
                                   const TensorGrid& gy) {
  TensorGrid gx(in_shape);
  for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax[o]] += gy[o];
  return gx;
}

inline TensorGrid gap_forward(const TensorGrid& x) {
  const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  TensorGrid y({N, C, 1, 1});
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    double acc = 0.0;
    for (std::size_t j = 0; j < plane; ++j) acc += x[nc * plane + j];
    y[nc] = acc / static_cast<double>(plane);
  }
  return y;
}

inline TensorGrid gap_backward(const Shape& in_shape, const TensorGrid& gy) {
  TensorGrid gx(in_shape);
  const std::size_t plane = in_shape[2] * in_shape[3];
  const double inv = 1.0 / static_cast<double>(plane);
  for (std::size_t nc = 0; nc < gy.size(); ++nc) {
    for (std::size_t j = 0; j < plane; ++j) gx[nc * plane + j] = gy[nc] * inv;
  }
  return gx;
}

inline TensorGrid scale_shift_forward(const TensorGrid& x, const LayerParams& p) {
  const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  TensorGrid y(x.shape());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const double a = p.weights[c], b = (*p.bias)[c];
      const std::size_t base = (n * C + c) * plane;
      for (std::size_t j = 0; j < plane; ++j) y[base + j] = a * x[base + j] + b;
    }
  }
  return y;
}

inline TensorGrid scale_shift_backward(const TensorGrid& x, LayerParams& p, const TensorGrid& gy) {
  const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  TensorGrid gx(x.shape());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const double a = p.weights[c];
      const std::size_t base = (n * C + c) * plane;
      double ga = 0.0, gb = 0.0;
      for (std::size_t j = 0; j < plane; ++j) {
        ga += gy[base + j] * x[base + j];
        gb += gy[base + j];
        gx[base + j] = a * gy[base + j];
      }
      p.weight_grad[c] += ga;
      p.bias_grad[c] += gb;
    }
  }
  return gx;
}

// Mean softmax cross-entropy over the batch. `probs` receives the softmax.
inline double softmax_ce_forward(const TensorGrid& logits, std::span<const int> labels, TensorGrid* probs) {
  const std::size_t N = logits.dim(0), K = logits.size() / N;
  if (labels.size() != N) {
    fail(ErrorCategory::shape_mismatch, "softmax_ce: " + std::to_string(labels.size()) + " labels for batch of " +
                                            std::to_string(N));
  }
  if (probs) *probs = TensorGrid({N, K});
  double loss = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const double* z = logits.data() + n * K;
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= K) {
      fail(ErrorCategory::label_range, "label " + std::to_string(labels[n]) + " outside [0, " + std::to_string(K) + ")");
    }
    const double zmax = *std::max_element(z, z + K);
    double denom = 0.0;
    for (std::size_t k = 0; k < K; ++k) denom += std::exp(z[k] - zmax);
    const double log_denom = std::log(denom);
    loss += -(z[labels[n]] - zmax - log_denom);
    if (probs) {
      for (std::size_t k = 0; k < K; ++k) (*probs)[n * K + k] = std::exp(z[k] - zmax - log_denom);
    }
  }
  return loss / static_cast<double>(N);
}

inline TensorGrid softmax_ce_backward(const Shape& logits_shape, const TensorGrid& probs, std::span<const int> labels,
                                      double scale) {
  TensorGrid g(logits_shape);
  const std::size_t N = labels.size(), K = probs.size() / N;
  const double inv = scale / static_cast<double>(N);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      g[n * K + k] = (probs[n * K + k] - (static_cast<int>(k) == labels[n] ? 1.0 : 0.0)) * inv;
    }
  }
  return g;
}

}  // namespace legr::ops
