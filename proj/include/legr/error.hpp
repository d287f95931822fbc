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

#include <stdexcept>
#include <string>
#include <string_view>

namespace legr {

// Every failure surfaced by the toolkit carries one of these categories. The
// CLI prints the category name as the first token of its one-line error so
// scripts can dispatch on it.
enum class ErrorCategory {
  invalid_argument,
  shape_mismatch,
  invalid_graph,
  invalid_mask,
  infeasible,
  state,
  parse,
  io,
  bad_magic,
  truncated,
  count_mismatch,
  fingerprint_mismatch,
  empty_dataset,
  label_range,
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::invalid_argument: return "invalid_argument";
    case ErrorCategory::shape_mismatch: return "shape_mismatch";
    case ErrorCategory::invalid_graph: return "invalid_graph";
    case ErrorCategory::invalid_mask: return "invalid_mask";
    case ErrorCategory::infeasible: return "infeasible";
    case ErrorCategory::state: return "state";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::io: return "io";
    case ErrorCategory::bad_magic: return "bad_magic";
    case ErrorCategory::truncated: return "truncated";
    case ErrorCategory::count_mismatch: return "count_mismatch";
    case ErrorCategory::fingerprint_mismatch: return "fingerprint_mismatch";
    case ErrorCategory::empty_dataset: return "empty_dataset";
    case ErrorCategory::label_range: return "label_range";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace legr
