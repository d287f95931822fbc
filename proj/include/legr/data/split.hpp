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
#include <utility>
#include <vector>

#include "legr/data/dataset.hpp"
#include "legr/error.hpp"
#include "legr/rng.hpp"

namespace legr {

struct SplitSpec {
  double val_fraction = 0.10;
  bool stratified = true;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

// Validation size is round(val_fraction * N). Stratified splits give every
// class floor(val_fraction * n_c) slots and hand out the remainder by largest
// fractional part (lowest class first on ties). Both index lists ascend.
inline SplitIndices split_indices(const std::vector<int>& labels, std::size_t class_count, const SplitSpec& spec) {
  if (labels.empty()) fail(ErrorCategory::empty_dataset, "cannot split an empty dataset");
  if (!(spec.val_fraction >= 0.0 && spec.val_fraction < 1.0)) {
    fail(ErrorCategory::invalid_argument, "val_fraction must lie in [0, 1)");
  }
  const std::size_t n = labels.size();
  const auto total = static_cast<std::size_t>(std::llround(spec.val_fraction * static_cast<double>(n)));
  if (total == 0) fail(ErrorCategory::invalid_argument, "validation split would be empty");
  if (total >= n) fail(ErrorCategory::invalid_argument, "training split would be empty");
  Rng rng(spec.seed);
  std::vector<bool> in_val(n, false);
  if (spec.stratified) {
    std::vector<std::vector<std::size_t>> by_class(class_count);
    for (std::size_t i = 0; i < n; ++i) by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
    std::vector<std::size_t> quota(class_count);
    std::vector<double> frac(class_count);
    std::size_t given = 0;
    for (std::size_t c = 0; c < class_count; ++c) {
      const double exact = spec.val_fraction * static_cast<double>(by_class[c].size());
      quota[c] = static_cast<std::size_t>(std::floor(exact));
      frac[c] = exact - std::floor(exact);
      given += quota[c];
    }
    std::vector<std::size_t> order(class_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; given < total && k < order.size(); ++k) {
      if (quota[order[k]] < by_class[order[k]].size()) {
        ++quota[order[k]];
        ++given;
      }
    }
    for (std::size_t c = 0; c < class_count; ++c) {
      auto members = by_class[c];
      std::shuffle(members.begin(), members.end(), rng);
      for (std::size_t k = 0; k < quota[c]; ++k) in_val[members[k]] = true;
    }
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < total; ++k) in_val[order[k]] = true;
  }
  SplitIndices out;
  for (std::size_t i = 0; i < n; ++i) (in_val[i] ? out.val : out.train).push_back(i);
  return out;
}

inline std::pair<Dataset, Dataset> split(const Dataset& d, const SplitSpec& spec) {
  validate_dataset(d);
  const auto idx = split_indices(d.labels, d.class_count, spec);
  return {subset(d, idx.train), subset(d, idx.val)};
}

}  // namespace legr
