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

#include <gtest/gtest.h>

#include "anysr/error.hpp"
#include "anysr/resize.hpp"
#include "test_util.hpp"

namespace anysr {
namespace {

TEST(CubicKernel, KeysValues) {
  EXPECT_DOUBLE_EQ(cubic_kernel(0.0), 1.0);
  EXPECT_DOUBLE_EQ(cubic_kernel(1.0), 0.0);
  EXPECT_DOUBLE_EQ(cubic_kernel(2.0), 0.0);
  EXPECT_DOUBLE_EQ(cubic_kernel(0.5), 0.5625);
  EXPECT_DOUBLE_EQ(cubic_kernel(-0.5), 0.5625);
  EXPECT_DOUBLE_EQ(cubic_kernel(1.5), -0.0625);
  EXPECT_DOUBLE_EQ(cubic_kernel(7.0), 0.0);
}

TEST(CubicKernel, PartitionOfUnity) {
  for (double t = 0.0; t < 1.0; t += 0.0625) {
    double sum = 0.0;
    for (int k = -2; k <= 2; ++k) sum += cubic_kernel(t - k);
    EXPECT_NEAR(sum, 1.0, 1e-12) << t;
  }
}

Tensor ramp(int h, int w) {
  Tensor t({3, h, w});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) t.at(c, y, x) = static_cast<float>(10 + 2 * y + 3 * x + c);
  return t;
}

TEST(BicubicUpscale, ConstantStaysConstant) {
  Tensor t({3, 5, 7});
  t.fill(93.0f);
  const Tensor u = bicubic_upscale(t, 4);
  EXPECT_EQ(u.shape(), (std::vector<int>{3, 20, 28}));
  for (float v : u.values()) EXPECT_NEAR(v, 93.0f, 1e-4);
}

TEST(BicubicUpscale, ReproducesLinearRampsInTheInterior) {
  const Tensor u = bicubic_upscale(ramp(8, 10), 4);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 40; ++x) {
      const double sy = (y + 0.5) / 4 - 0.5, sx = (x + 0.5) / 4 - 0.5;
      if (sy < 1 || sy > 5 || sx < 1 || sx > 7) continue;  // taps would hit the border
      EXPECT_NEAR(u.at(1, y, x), 11 + 2 * sy + 3 * sx, 1e-3);
    }
}

TEST(BicubicUpscale, ClampsOvershoot) {
  Tensor t({1, 4, 4});
  for (int y = 0; y < 4; ++y)
    for (int x = 2; x < 4; ++x) t.at(0, y, x) = 255.0f;
  const Tensor u = bicubic_upscale(t, 4);
  for (float v : u.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 255.0f);
  }
  EXPECT_THROW(bicubic_upscale(Tensor({3, 0, 4}), 4), ConfigError);
}

TEST(BicubicUpscale, FlopsModel) {
  EXPECT_EQ(bicubic_upscale_flops(3, 32, 32, 4), 491520u);
  EXPECT_EQ(bicubic_upscale_flops(1, 1, 1, 2), 2u * (4 * 2 + 4 * 4));
}

TEST(BicubicDownscale, ConstantAndRamp) {
  Tensor t({3, 64, 64});
  t.fill(17.0f);
  const Tensor flat = bicubic_downscale(t, 4);
  for (float v : flat.values()) EXPECT_NEAR(v, 17.0f, 1e-4);
  const Tensor d = bicubic_downscale(ramp(64, 64), 4);
  EXPECT_EQ(d.shape(), (std::vector<int>{3, 16, 16}));
  // Symmetric normalized taps keep a linear function at the sample centre.
  for (int y = 2; y < 14; ++y)
    for (int x = 2; x < 14; ++x) EXPECT_NEAR(d.at(0, y, x), 10 + 2 * (4 * y + 1.5) + 3 * (4 * x + 1.5), 1e-3);
  EXPECT_THROW(bicubic_downscale(Tensor({3, 10, 12}), 4), ConfigError);
}

TEST(Quantize, RoundsAndClamps) {
  Tensor t({1, 1, 5});
  const float in[5] = {2.4f, 2.6f, -3.0f, 300.0f, 128.0f};
  for (int i = 0; i < 5; ++i) t[static_cast<std::size_t>(i)] = in[i];
  quantize_8bit(t);
  EXPECT_EQ(t[0], 2.0f);
  EXPECT_EQ(t[1], 3.0f);
  EXPECT_EQ(t[2], 0.0f);
  EXPECT_EQ(t[3], 255.0f);
  EXPECT_EQ(t[4], 128.0f);
}

TEST(ImagePair, CropsToScaleAndQuantizes) {
  const Tensor hr = testing::random_tensor({3, 10, 11}, 3, 0.0f, 255.0f);
  const ImagePair p = make_image_pair(hr, 4);
  EXPECT_EQ(p.hr.shape(), (std::vector<int>{3, 8, 8}));
  EXPECT_EQ(p.lr.shape(), (std::vector<int>{3, 2, 2}));
  EXPECT_EQ(p.hr.at(2, 7, 7), hr.at(2, 7, 7));
  for (float v : p.lr.values()) EXPECT_EQ(v, std::nearbyint(v));
  EXPECT_THROW(make_image_pair(Tensor({3, 3, 8}), 4), ConfigError);
  EXPECT_THROW(make_image_pair(Tensor({1, 8, 8}), 4), ConfigError);
}

}  // namespace
}  // namespace anysr
