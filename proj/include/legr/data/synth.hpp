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
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "legr/data/dataset.hpp"
#include "legr/error.hpp"
#include "legr/rng.hpp"

namespace legr {

struct SynthOptions {
  double noise = 0.3;      // std of additive Gaussian pixel noise
  double max_shift = 0.125;  // random offset, as a fraction of the image size
};

namespace detail {

// Membership test for class `cls` at offset (dx, dy) from the pattern centre,
// radius r and stroke half-width t.
inline bool shape_covers(int cls, double dx, double dy, double r, double t) {
  const double d = std::hypot(dx, dy);
  const double ax = std::abs(dx), ay = std::abs(dy);
  switch (cls) {
    case 0: return ay <= t && ax <= r;                                   // horizontal bar
    case 1: return ax <= t && ay <= r;                                   // vertical bar
    case 2: return (ay <= t && ax <= r) || (ax <= t && ay <= r);         // plus
    case 3: return d <= r;                                               // disk
    case 4: return std::abs(d - r) <= t;                                 // ring
    case 5: return std::abs(dx - dy) <= 1.4 * t && ax <= r && ay <= r;   // diagonal
    case 6: return std::abs(std::max(ax, ay) - r) <= t;                  // square outline
    case 7: return (std::abs(dx - dy) <= 1.4 * t || std::abs(dx + dy) <= 1.4 * t) && ax <= r && ay <= r;  // X
    case 8: return std::hypot(ax - 0.6 * r, dy) <= 0.4 * r;              // two dots
    case 9: return dy >= -r && dy <= r && ax <= (dy + r) / 2.0;          // triangle
    default: return false;
  }
}

}  // namespace detail

// Grayscale images of class-specific geometric patterns with random offset,
// scale, intensity and pixel noise. Pixel values are clipped to [0, 1].
// Sample i has label i % classes before the order is shuffled, so class sizes
// differ by at most one.
inline Dataset synth_shapes(std::size_t n, std::size_t classes, std::size_t size, std::uint64_t seed,
                            const SynthOptions& opt = {}) {
  if (classes < 2 || classes > 10) fail(ErrorCategory::invalid_argument, "synth_shapes: classes must be in 2..10");
  if (size < 16) fail(ErrorCategory::invalid_argument, "synth_shapes: size must be >= 16");
  if (n == 0) fail(ErrorCategory::empty_dataset, "synth_shapes: n must be positive");
  Rng rng(seed);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % classes);
  std::shuffle(labels.begin(), labels.end(), rng);

  Dataset d;
  d.class_count = classes;
  d.labels = labels;
  d.images = TensorGrid({n, 1, size, size});
  const double s = static_cast<double>(size);
  std::uniform_real_distribution<double> shift(-opt.max_shift * s, opt.max_shift * s);
  std::uniform_real_distribution<double> scale(0.8, 1.2);
  std::uniform_real_distribution<double> level(0.6, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double stroke = std::max(1.0, s / 16.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double cx = (s - 1.0) / 2.0 + shift(rng);
    const double cy = (s - 1.0) / 2.0 + shift(rng);
    const double r = s / 4.0 * scale(rng);
    const double v = level(rng);
    double* img = d.images.data() + i * size * size;
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        double p = detail::shape_covers(labels[i], static_cast<double>(x) - cx, static_cast<double>(y) - cy, r, stroke) ? v : 0.0;
        if (opt.noise > 0.0) p += opt.noise * noise(rng);
        img[y * size + x] = std::clamp(p, 0.0, 1.0);
      }
    }
  }
  return d;
}

}  // namespace legr
