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
#include <string>
#include <string_view>

#include "legr/data/dataset.hpp"
#include "legr/error.hpp"
#include "legr/io.hpp"

// IDX files: big-endian magic (0x00000803 for rank-3 unsigned-byte images,
// 0x00000801 for rank-1 labels), one big-endian uint32 per dimension, then
// raw bytes.
namespace legr {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::uint32_t be32(std::string_view bytes, std::size_t at) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 3]));
}

inline void check_idx_header(std::string_view bytes, std::uint32_t magic, std::size_t dims, const std::string& what) {
  if (bytes.size() < 4) fail(ErrorCategory::truncated, what + ": file shorter than the IDX magic");
  if (be32(bytes, 0) != magic) fail(ErrorCategory::bad_magic, what + ": bad magic");
  if (bytes.size() < 4 + 4 * dims) fail(ErrorCategory::truncated, what + ": truncated IDX header");
}

}  // namespace detail

inline Dataset decode_idx(std::string_view images, std::string_view labels) {
  detail::check_idx_header(images, kIdxImagesMagic, 3, "images");
  detail::check_idx_header(labels, kIdxLabelsMagic, 1, "labels");
  const std::size_t n = detail::be32(images, 4), rows = detail::be32(images, 8), cols = detail::be32(images, 12);
  const std::size_t n_labels = detail::be32(labels, 4);
  if (images.size() - 16 < n * rows * cols) fail(ErrorCategory::truncated, "images: payload shorter than header claims");
  if (labels.size() - 8 < n_labels) fail(ErrorCategory::truncated, "labels: payload shorter than header claims");
  if (n != n_labels) {
    fail(ErrorCategory::count_mismatch, "count mismatch: " + std::to_string(n) + " images vs " + std::to_string(n_labels) + " labels");
  }
  if (n == 0 || rows == 0 || cols == 0) fail(ErrorCategory::empty_dataset, "IDX dataset is empty");
  Dataset d;
  d.images = TensorGrid({n, 1, rows, cols});
  for (std::size_t i = 0; i < n * rows * cols; ++i) {
    d.images[i] = static_cast<double>(static_cast<unsigned char>(images[16 + i])) / 255.0;
  }
  d.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = static_cast<unsigned char>(labels[8 + i]);
    max_label = std::max(max_label, d.labels[i]);
  }
  d.class_count = static_cast<std::size_t>(max_label) + 1;
  return d;
}

inline Dataset read_idx(const std::string& images_path, const std::string& labels_path) {
  return decode_idx(read_file(images_path), read_file(labels_path));
}

}  // namespace legr
