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

#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

#include "legr/data/idx.hpp"
#include "legr/data/split.hpp"
#include "legr/data/synth.hpp"
#include "legr/nn/network.hpp"
#include "legr/nn/train.hpp"

namespace {

using namespace legr;

std::map<int, std::size_t> class_counts(const std::vector<int>& labels) {
  std::map<int, std::size_t> c;
  for (int y : labels) ++c[y];
  return c;
}

TEST(Synth, DeterministicPerSeed) {
  EXPECT_EQ(synth_shapes(50, 4, 16, 9), synth_shapes(50, 4, 16, 9));
  EXPECT_FALSE(synth_shapes(50, 4, 16, 9) == synth_shapes(50, 4, 16, 10));
}

TEST(Synth, BalancedWithinOne) {
  EXPECT_EQ(class_counts(synth_shapes(10, 3, 16, 1).labels), (std::map<int, std::size_t>{{0, 4}, {1, 3}, {2, 3}}));
  for (std::size_t k = 2; k <= 10; ++k) {
    const auto c = class_counts(synth_shapes(97, k, 16, k).labels);
    std::size_t lo = 1000, hi = 0;
    for (const auto& [y, n] : c) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    EXPECT_EQ(c.size(), k);
    EXPECT_LE(hi - lo, 1u);
  }
}

TEST(Synth, PixelsInUnitRangeAndArgumentChecks) {
  const auto d = synth_shapes(20, 5, 20, 3);
  EXPECT_EQ(d.images.shape(), (Shape{20, 1, 20, 20}));
  for (double v : d.images.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(synth_shapes(10, 11, 16, 1), Error);
  EXPECT_THROW(synth_shapes(10, 3, 8, 1), Error);
}

TEST(Synth, NoiselessSetIsLearnable) {
  auto data = synth_shapes(200, 4, 16, 5, SynthOptions{0.0, 0.125});
  standardize(data, channel_stats(data));
  ArchSpec a;
  a.in_channels = 1;
  a.in_height = a.in_width = 16;
  auto L = [](std::string name, LayerKind kind, std::vector<std::string> in, std::size_t k, std::size_t stride,
              std::size_t out) {
    LayerSpec l;
    l.name = std::move(name);
    l.kind = kind;
    l.k = k;
    l.stride = stride;
    l.pad = k / 2;
    l.out_channels = out;
    l.inputs = std::move(in);
    return l;
  };
  a.layers = {L("c1", LayerKind::conv, {"input"}, 3, 1, 8), L("r1", LayerKind::relu, {"c1"}, 1, 1, 0),
              L("c2", LayerKind::conv, {"r1"}, 3, 2, 16),   L("r2", LayerKind::relu, {"c2"}, 1, 1, 0),
              L("c3", LayerKind::conv, {"r2"}, 3, 2, 16),   L("r3", LayerKind::relu, {"c3"}, 1, 1, 0),
              L("g", LayerKind::gap, {"r3"}, 1, 1, 0),      L("fc", LayerKind::dense, {"g"}, 1, 1, 4),
              L("loss", LayerKind::softmax_ce, {"fc"}, 1, 1, 0)};
  Rng rng(2);
  Network net(build_graph(a), rng);
  TrainConfig c;
  c.learning_rate = 0.01;
  c.batch_size = 16;
  c.seed = 3;
  train_steps(net, data, c, 500);
  EXPECT_GE(evaluate(net, data), 0.99);
}

std::string be32(std::uint32_t v) {
  return {static_cast<char>(v >> 24), static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 8) & 0xff),
          static_cast<char>(v & 0xff)};
}

// Two 4x4 images with pixel bytes 0..15 and 255..240; labels 1 and 0.
std::string image_fixture() {
  std::string s = be32(0x00000803) + be32(2) + be32(4) + be32(4);
  for (int i = 0; i < 16; ++i) s.push_back(static_cast<char>(i));
  for (int i = 0; i < 16; ++i) s.push_back(static_cast<char>(255 - i));
  return s;
}

std::string label_fixture(std::uint32_t magic = 0x00000801, std::uint32_t count = 2) {
  std::string s = be32(magic) + be32(count);
  s.push_back(1);
  s.push_back(0);
  return s;
}

ErrorCategory category_of(const std::string& images, const std::string& labels) {
  try {
    decode_idx(images, labels);
  } catch (const Error& e) {
    return e.category();
  }
  return ErrorCategory::state;
}

TEST(Idx, HandBuiltPairDecodesExactly) {
  const auto d = decode_idx(image_fixture(), label_fixture());
  EXPECT_EQ(d.images.shape(), (Shape{2, 1, 4, 4}));
  for (int i = 0; i < 16; ++i) {
    EXPECT_EQ(d.images[i], i / 255.0);
    EXPECT_EQ(d.images[16 + i], (255 - i) / 255.0);
  }
  EXPECT_EQ(d.labels, (std::vector<int>{1, 0}));
  EXPECT_EQ(d.class_count, 2u);

  const auto dir = std::filesystem::temp_directory_path() / "legr_idx_test";
  write_file((dir / "img").string(), image_fixture());
  write_file((dir / "lbl").string(), label_fixture());
  EXPECT_EQ(read_idx((dir / "img").string(), (dir / "lbl").string()), d);
}

TEST(Idx, DistinctErrors) {
  EXPECT_EQ(category_of(image_fixture(), label_fixture(0x00000803)), ErrorCategory::bad_magic);
  EXPECT_EQ(category_of(image_fixture(), label_fixture(0x00000801, 3)), ErrorCategory::truncated);
  EXPECT_EQ(category_of(image_fixture().substr(0, 30), label_fixture()), ErrorCategory::truncated);
  std::string one_label = be32(0x00000801) + be32(1);
  one_label.push_back(0);
  EXPECT_EQ(category_of(image_fixture(), one_label), ErrorCategory::count_mismatch);
  EXPECT_THROW(read_idx("/nonexistent/legr/images", "/nonexistent/legr/labels"), Error);
}

Dataset labelled(std::size_t n, std::size_t classes) {
  Dataset d;
  d.class_count = classes;
  d.images = TensorGrid({n, 1, 1, 1});
  for (std::size_t i = 0; i < n; ++i) {
    d.labels.push_back(static_cast<int>(i % classes));
    d.images[i] = static_cast<double>(i);  // sample identity
  }
  return d;
}

TEST(Split, NinetyTen) {
  const auto d = labelled(100, 4);
  for (const bool strat : {true, false}) {
    const auto idx = split_indices(d.labels, 4, {0.10, strat, 7});
    EXPECT_EQ(idx.train.size(), 90u);
    EXPECT_EQ(idx.val.size(), 10u);
    std::set<std::size_t> all(idx.train.begin(), idx.train.end());
    all.insert(idx.val.begin(), idx.val.end());
    EXPECT_EQ(all.size(), 100u);
  }
}

TEST(Split, ZeroFractionRejected) {
  try {
    split(labelled(20, 2), {0.0, false, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::invalid_argument);
  }
  EXPECT_THROW(split(labelled(5, 2), {0.05, true, 1}), Error);
  EXPECT_THROW(split(labelled(5, 2), {1.0, true, 1}), Error);
}

TEST(Split, StratifiedCoversEveryClass) {
  const auto d = labelled(200, 10);
  const auto [train, val] = split(d, {0.10, true, 3});
  const auto counts = class_counts(val.labels);
  EXPECT_EQ(counts.size(), 10u);
  for (const auto& [y, n] : counts) EXPECT_EQ(n, 2u);
  EXPECT_EQ(train.size(), 180u);
}

TEST(Split, DeterministicDisjointAndExhaustive) {
  const auto d = labelled(137, 3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [tr, va] = split(d, {0.2, seed % 2 == 0, seed});
    const auto [tr2, va2] = split(d, {0.2, seed % 2 == 0, seed});
    EXPECT_EQ(tr, tr2);
    EXPECT_EQ(va, va2);
    std::set<double> ids;
    for (double v : tr.images.values()) ids.insert(v);
    for (double v : va.images.values()) EXPECT_TRUE(ids.insert(v).second);
    EXPECT_EQ(ids.size(), 137u);
  }
}

TEST(Standardize, IdempotentOnOwnStats) {
  auto d = synth_shapes(64, 4, 16, 11);
  standardize(d, channel_stats(d));
  const auto s = channel_stats(d);
  EXPECT_NEAR(s.mean[0], 0.0, 1e-6);
  EXPECT_NEAR(s.stddev[0], 1.0, 1e-6);
  auto again = d;
  standardize(again, s);
  const auto s2 = channel_stats(again);
  EXPECT_NEAR(s2.mean[0], 0.0, 1e-6);
  EXPECT_NEAR(s2.stddev[0], 1.0, 1e-6);
}

}  // namespace
