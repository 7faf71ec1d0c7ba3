/* Copyright 2026 The AnySR Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "anysr/error.hpp"
#include "anysr/resize.hpp"
#include "anysr/supernet.hpp"
#include "test_util.hpp"

namespace anysr {
namespace {

using testing::random_tensor;
using testing::TempDir;

// 2 x MACs at a 32x32 LR input for hidden widths (D, d), mapping depth 4,
// x4 upsampler counted on its 128x128 output grid.
std::uint64_t hand_flops(std::uint64_t D, std::uint64_t d) {
  const std::uint64_t lr = 32 * 32, hr = 128 * 128;
  return 2 * (25 * 3 * D * lr + D * d * lr + 4 * 9 * d * d * lr + d * D * lr + 81 * D * 3 * hr);
}

TEST(SupernetConfig, DefaultGeometry) {
  const SupernetConfig c;
  EXPECT_EQ(c.num_layers(), 8);
  const auto specs = layer_specs(c, 1.0);
  ASSERT_EQ(specs.size(), 8u);
  EXPECT_EQ(specs[0].out_channels, 56);
  EXPECT_EQ(specs[1].out_channels, 12);
  EXPECT_EQ(specs[6].out_channels, 56);
  EXPECT_TRUE(specs[7].transposed);
  EXPECT_EQ(specs[7].output_height(32), 128);
}

TEST(SupernetConfig, SlicedWidths) {
  EXPECT_EQ(sliced_channels(0.29, 56), 16);
  EXPECT_EQ(sliced_channels(0.29, 12), 3);
  EXPECT_EQ(sliced_channels(0.46, 56), 26);
  EXPECT_EQ(sliced_channels(0.46, 12), 6);
  EXPECT_EQ(sliced_channels(0.01, 12), 1);
  const auto s = layer_specs(SupernetConfig{}, 0.29);
  EXPECT_EQ(s[0].in_channels, 3);
  EXPECT_EQ(s[7].out_channels, 3);
}

TEST(SupernetConfig, ValidationRejectsBadWidths) {
  SupernetConfig c;
  c.widths = {0.5, 0.9};
  EXPECT_THROW(c.validate(), ConfigError);
  c.widths = {0.5, 0.4, 1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c.widths = {0.0, 1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c.widths = {};
  EXPECT_THROW(c.validate(), ConfigError);
  c = SupernetConfig{};
  EXPECT_THROW(c.width_index(0.3), ConfigError);
  EXPECT_EQ(c.width_index(0.46), 1);
}

TEST(SupernetConfig, TextRoundTrip) {
  SupernetConfig c;
  c.widths = {0.25, 0.5, 1.0};
  c.global_skip = false;
  EXPECT_EQ(SupernetConfig::parse(c.to_text()), c);
  EXPECT_THROW(SupernetConfig::parse(c.to_text() + "bogus = 1\n"), ConfigError);
  std::string missing = c.to_text();
  missing.erase(0, missing.find('\n') + 1);
  EXPECT_THROW(SupernetConfig::parse(missing), ConfigError);
}

TEST(Supernet, ParameterCount) {
  const ParameterStore s = build_supernet(SupernetConfig{}, 1);
  ASSERT_EQ(s.layers().size(), 8u);
  const std::vector<std::size_t> per_layer{4312, 696, 1320, 1320, 1320, 1320, 784, 13611};
  for (std::size_t l = 0; l < 8; ++l) EXPECT_EQ(s.layers()[l].parameter_count(), per_layer[l]) << l;
  EXPECT_EQ(s.parameter_count(), 24683u);
}

TEST(Supernet, InitIsSeededHeNormal) {
  const ParameterStore a = build_supernet(SupernetConfig{}, 5);
  EXPECT_EQ(a, build_supernet(SupernetConfig{}, 5));
  EXPECT_NE(a, build_supernet(SupernetConfig{}, 6));
  for (std::size_t l = 0; l + 1 < a.layers().size(); ++l) {
    for (float b : a.layers()[l].bias) EXPECT_EQ(b, 0.0f);
    for (float v : a.layers()[l].prelu_slope) EXPECT_EQ(v, 0.25f);
  }
  EXPECT_FALSE(a.layers().back().has_activation());
  // Feature layer: 4200 draws with std sqrt(2 / 75).
  const Tensor& k = a.layers()[0].kernel;
  double sq = 0.0;
  for (float v : k.values()) sq += static_cast<double>(v) * v;
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(k.size())), std::sqrt(2.0 / 75.0), 0.01);
}

TEST(Flops, FrozenValuesAt32) {
  const SupernetConfig c;
  EXPECT_EQ(subnet_flops(c, 1.0, 32, 32), hand_flops(56, 12));
  EXPECT_EQ(subnet_flops(c, 0.29, 32, 32), hand_flops(16, 3));
  EXPECT_EQ(subnet_flops(c, 0.46, 32, 32), hand_flops(26, 6));
  EXPECT_EQ(subnet_flops(c, 1.0, 32, 32), 467877888u);
  EXPECT_EQ(subnet_flops(c, 0.29, 32, 32), 130719744u);
  EXPECT_EQ(subnet_flops(c, 0.46, 32, 32), 214315008u);
  EXPECT_EQ(bicubic_upscale_flops(3, 32, 32, 4), 491520u);
}

TEST(Flops, ScalesWithArea) {
  const SupernetConfig c;
  EXPECT_EQ(subnet_flops(c, 0.46, 64, 64), 4 * subnet_flops(c, 0.46, 32, 32));
  EXPECT_LT(subnet_flops(c, 0.29, 32, 32), subnet_flops(c, 0.46, 32, 32));
  EXPECT_THROW(subnet_flops(c, 1.0, 0, 32), ConfigError);
}

TEST(Supernet, ForwardShapeAndUnknownWidth) {
  const ParameterStore s = build_supernet(SupernetConfig{}, 2);
  const Tensor y = supernet_forward(s, 0.46, random_tensor({3, 6, 5}, 3, 0.0f, 255.0f));
  EXPECT_EQ(y.shape(), (std::vector<int>{3, 24, 20}));
  EXPECT_TRUE(y.all_finite());
  EXPECT_THROW(supernet_forward(s, 0.5, random_tensor({3, 6, 5}, 3)), ConfigError);
  EXPECT_THROW(supernet_forward(s, 1.0, random_tensor({1, 6, 5}, 3)), ConfigError);
}

// A subnet's output depends only on the weights inside its slice.
TEST(Supernet, SubnetIgnoresWeightsOutsideItsSlice) {
  for (double alpha : {0.29, 0.46}) {
    ParameterStore s = build_supernet(SupernetConfig{}, 7);
    const Tensor x = random_tensor({3, 8, 8}, 8, 0.0f, 255.0f);
    const Tensor before = supernet_forward(s, alpha, x);
    const SliceMask m = slice_mask(s, alpha);
    std::mt19937_64 rng(9);
    std::normal_distribution<float> n(0.0f, 1.0f);
    for (std::size_t l = 0; l < s.layers().size(); ++l) {
      LayerWeights& w = s.mutable_layers()[l];
      for (std::size_t i = 0; i < w.kernel.size(); ++i)
        if (!m.kernel[l][i]) w.kernel[i] += n(rng);
      for (std::size_t i = 0; i < w.bias.size(); ++i)
        if (!m.bias[l][i]) w.bias[i] += n(rng);
      for (std::size_t i = 0; i < w.prelu_slope.size(); ++i)
        if (!m.slope[l][i]) w.prelu_slope[i] += n(rng);
    }
    EXPECT_EQ(supernet_forward(s, alpha, x), before);
    EXPECT_NE(supernet_forward(s, 1.0, x), supernet_forward(build_supernet(SupernetConfig{}, 7), 1.0, x));
  }
}

TEST(Supernet, SliceMaskCountsMatchSubnetSize) {
  const ParameterStore s = build_supernet(SupernetConfig{}, 1);
  for (double alpha : {0.29, 0.46, 1.0}) {
    const SliceMask m = slice_mask(s, alpha);
    const SubnetView v(s, alpha);
    std::size_t inside = 0, expected = 0;
    for (std::size_t l = 0; l < s.layers().size(); ++l) {
      for (auto b : m.kernel[l]) inside += b;
      for (auto b : m.bias[l]) inside += b;
      for (auto b : m.slope[l]) inside += b;
      expected += v.sliced_layer(static_cast<int>(l)).parameter_count();
    }
    EXPECT_EQ(inside, expected) << alpha;
  }
}

TEST(Supernet, TraceMatchesForward) {
  for (bool skip : {true, false}) {
    SupernetConfig c;
    c.global_skip = skip;
    const ParameterStore s = build_supernet(c, 4);
    // Bright saturated edges make bicubic overshoot, exercising the clamp.
    Tensor x = random_tensor({3, 6, 6}, 5, 0.0f, 255.0f);
    for (std::size_t i = 0; i < x.size(); i += 3) x[i] = 255.0f;
    Tensor xn = x;
    for (float& v : xn.values()) v /= 255.0f;
    const Tensor y = supernet_forward(s, 0.46, x);
    const ForwardTrace t = forward_trace(s, 0.46, xn);
    ASSERT_EQ(t.output.shape(), y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(t.output[i] * 255.0f, y[i], 2e-3f);
  }
}

class StoreGradTest : public ::testing::TestWithParam<bool> {};

// Directional derivatives of sum(go * output) along random per-tensor
// directions against central differences. Slopes start at 1 so no PReLU
// kink sits within the step.
TEST_P(StoreGradTest, BackwardMatchesDirectionalDifferences) {
  SupernetConfig c;
  c.base_width = 6;
  c.shrink_width = 3;
  c.mapping_depth = 1;
  c.widths = {0.5, 1.0};
  c.global_skip = GetParam();
  ParameterStore s = build_supernet(c, 11);
  for (LayerWeights& w : s.mutable_layers()) {
    for (float& a : w.prelu_slope) a = 1.0f;
    for (float& b : w.bias) b = 0.05f;
  }
  for (float& v : s.mutable_layers().back().kernel.values()) v *= 100.0f;
  const Tensor x = random_tensor({3, 4, 4}, 12, 0.0f, 1.0f);
  for (double alpha : {0.5, 1.0}) {
    const ForwardTrace t = forward_trace(s, alpha, x);
    const Tensor go = random_tensor(t.output.shape(), 13);
    StoreGrads g = StoreGrads::zeros_like(s);
    backward_into(s, t, go, g);
    const auto objective = [&](const ParameterStore& p) {
      const Tensor y = forward_trace(p, alpha, x).output;
      double acc = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) acc += static_cast<double>(y[i]) * go[i];
      return acc;
    };
    std::mt19937_64 rng(14);
    std::normal_distribution<float> n(0.0f, 1.0f);
    const float eps = 1e-2f;
    for (std::size_t l = 0; l < s.layers().size(); ++l) {
      for (int part = 0; part < 3; ++part) {
        auto span_of = [&](ParameterStore& p) -> std::span<float> {
          LayerWeights& w = p.mutable_layers()[l];
          if (part == 0) return w.kernel.values();
          if (part == 1) return w.bias;
          return w.prelu_slope;
        };
        const std::vector<float>& grad = part == 0 ? g.kernel[l] : part == 1 ? g.bias[l] : g.slope[l];
        if (grad.empty()) continue;
        std::vector<float> dir(grad.size());
        for (float& d : dir) d = n(rng);
        double analytic = 0.0;
        for (std::size_t i = 0; i < dir.size(); ++i) analytic += static_cast<double>(grad[i]) * dir[i];
        ParameterStore up = s, down = s;
        for (std::size_t i = 0; i < dir.size(); ++i) {
          span_of(up)[i] += eps * dir[i];
          span_of(down)[i] -= eps * dir[i];
        }
        const double numeric = (objective(up) - objective(down)) / (2.0 * eps);
        EXPECT_NEAR(analytic, numeric, 2e-2 * std::max(1.0, std::fabs(numeric)))
            << "alpha " << alpha << " layer " << l << " part " << part;
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Skip, StoreGradTest, ::testing::Bool());

TEST(Supernet, GradientsVanishOutsideTheSlice) {
  const ParameterStore s = build_supernet(SupernetConfig{}, 21);
  const ForwardTrace t = forward_trace(s, 0.29, random_tensor({3, 6, 6}, 22, 0.0f, 1.0f));
  StoreGrads g = StoreGrads::zeros_like(s);
  backward_into(s, t, random_tensor(t.output.shape(), 23), g);
  const SliceMask m = slice_mask(s, 0.29);
  std::size_t nonzero_inside = 0;
  for (std::size_t l = 0; l < g.kernel.size(); ++l) {
    for (std::size_t i = 0; i < g.kernel[l].size(); ++i) {
      if (!m.kernel[l][i]) { ASSERT_EQ(g.kernel[l][i], 0.0f); }
      else nonzero_inside += g.kernel[l][i] != 0.0f;
    }
    for (std::size_t i = 0; i < g.bias[l].size(); ++i)
      if (!m.bias[l][i]) { ASSERT_EQ(g.bias[l][i], 0.0f); }
    for (std::size_t i = 0; i < g.slope[l].size(); ++i)
      if (!m.slope[l][i]) { ASSERT_EQ(g.slope[l][i], 0.0f); }
  }
  EXPECT_GT(nonzero_inside, 0u);
  EXPECT_THROW(backward_into(s, t, Tensor({3, 4, 4}), g), ConfigError);
}

TEST(StoreGrads, AddAndScale) {
  const ParameterStore s = build_supernet(SupernetConfig{}, 1);
  StoreGrads a = StoreGrads::zeros_like(s), b = StoreGrads::zeros_like(s);
  b.kernel[0][3] = 2.0f;
  b.bias[7][1] = -1.0f;
  a.add(b);
  a.add(b);
  a.scale(0.25f);
  EXPECT_EQ(a.kernel[0][3], 1.0f);
  EXPECT_EQ(a.bias[7][1], -0.5f);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  SupernetConfig c;
  c.widths = {0.3, 1.0};
  const ParameterStore s = build_supernet(c, 31);
  save_checkpoint(dir / "w.ckpt", s);
  const ParameterStore r = load_checkpoint(dir / "w.ckpt");
  EXPECT_EQ(r, s);
  EXPECT_EQ(store_fingerprint(r), store_fingerprint(s));
  EXPECT_NE(store_fingerprint(s), store_fingerprint(build_supernet(c, 32)));
  EXPECT_EQ(load_checkpoint(dir / "w.ckpt", c), s);
  EXPECT_THROW(load_checkpoint(dir / "w.ckpt", SupernetConfig{}), ConfigError);
}

TEST(Checkpoint, DamagedFilesAreRejected) {
  TempDir dir;
  save_checkpoint(dir / "w.ckpt", build_supernet(SupernetConfig{}, 33));
  std::string bytes;
  {
    std::ifstream in(dir / "w.ckpt", std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    bytes = ss.str();
  }
  const auto write = [&](const std::string& name, const std::string& data) {
    std::ofstream(dir / name, std::ios::binary) << data;
    return dir / name;
  };
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  EXPECT_THROW(load_checkpoint(write("flip.ckpt", flipped)), FormatError);
  EXPECT_THROW(load_checkpoint(write("short.ckpt", bytes.substr(0, bytes.size() - 9))), FormatError);
  EXPECT_THROW(load_checkpoint(write("tiny.ckpt", bytes.substr(0, 3))), FormatError);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(load_checkpoint(write("magic.ckpt", magic)), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "absent.ckpt"), IoError);
}

}  // namespace
}  // namespace anysr
