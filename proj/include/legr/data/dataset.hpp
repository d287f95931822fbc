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

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "legr/error.hpp"
#include "legr/tensor.hpp"

namespace legr {

struct Dataset {
  TensorGrid images;  // N x C x H x W
  std::vector<int> labels;
  std::size_t class_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  std::size_t sample_volume() const { return images.size() / images.dim(0); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline void validate_dataset(const Dataset& d) {
  if (d.empty()) fail(ErrorCategory::empty_dataset, "dataset is empty");
  if (d.images.rank() != 4 || d.images.dim(0) != d.labels.size()) {
    fail(ErrorCategory::count_mismatch, "dataset has " + std::to_string(d.labels.size()) + " labels for images " +
                                            shape_string(d.images.shape()));
  }
  for (int y : d.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= d.class_count) {
      fail(ErrorCategory::label_range, "label " + std::to_string(y) + " outside [0, " + std::to_string(d.class_count) + ")");
    }
  }
}

// Rows `indices` of `d`, in that order.
inline Dataset subset(const Dataset& d, std::span<const std::size_t> indices) {
  Dataset out;
  out.class_count = d.class_count;
  if (indices.empty()) return out;
  Shape shape = d.images.shape();
  shape[0] = indices.size();
  out.images = TensorGrid(shape);
  const std::size_t vol = d.sample_volume();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const double* src = d.images.data() + indices[i] * vol;
    std::copy(src, src + vol, out.images.data() + i * vol);
    out.labels.push_back(d.labels[indices[i]]);
  }
  return out;
}

// Per-channel mean and standard deviation.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline ChannelStats channel_stats(const Dataset& d) {
  validate_dataset(d);
  const std::size_t N = d.images.dim(0), C = d.images.dim(1), plane = d.images.dim(2) * d.images.dim(3);
  ChannelStats s{std::vector<double>(C, 0.0), std::vector<double>(C, 0.0)};
  const double count = static_cast<double>(N * plane);
  for (std::size_t c = 0; c < C; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double* p = d.images.data() + (n * C + c) * plane;
      for (std::size_t j = 0; j < plane; ++j) sum += p[j];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double* p = d.images.data() + (n * C + c) * plane;
      for (std::size_t j = 0; j < plane; ++j) sq += (p[j] - mean) * (p[j] - mean);
    }
    s.mean[c] = mean;
    s.stddev[c] = std::sqrt(sq / count);
  }
  return s;
}

// Applies (x - mean) / std per channel. Stats should come from the training
// split and be reused for validation and test data.
inline void standardize(Dataset& d, const ChannelStats& s) {
  if (d.empty()) return;
  const std::size_t N = d.images.dim(0), C = d.images.dim(1), plane = d.images.dim(2) * d.images.dim(3);
  if (s.mean.size() != C) fail(ErrorCategory::shape_mismatch, "standardization stats have wrong channel count");
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const double inv = s.stddev[c] > 0.0 ? 1.0 / s.stddev[c] : 1.0;
      double* p = d.images.data() + (n * C + c) * plane;
      for (std::size_t j = 0; j < plane; ++j) p[j] = (p[j] - s.mean[c]) * inv;
    }
  }
}

}  // namespace legr
