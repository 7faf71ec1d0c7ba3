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

#include "anysr/resize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "anysr/error.hpp"

namespace anysr {
namespace {

struct Taps {
  std::vector<int> index;     // n_out * width
  std::vector<float> weight;  // n_out * width
  int width = 0;
};

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

Taps upscale_taps(int n_in, int scale) {
  Taps t;
  t.width = 4;
  const int n_out = n_in * scale;
  for (int x = 0; x < n_out; ++x) {
    const double u = (x + 0.5) / scale - 0.5;
    const int base = static_cast<int>(std::floor(u)) - 1;
    for (int k = 0; k < 4; ++k) {
      t.index.push_back(clamp_index(base + k, n_in));
      t.weight.push_back(static_cast<float>(cubic_kernel(u - (base + k))));
    }
  }
  return t;
}

Taps downscale_taps(int n_in, int scale) {
  Taps t;
  t.width = 4 * scale;
  const int n_out = n_in / scale;
  for (int x = 0; x < n_out; ++x) {
    const double u = (x + 0.5) * scale - 0.5;
    const int base = static_cast<int>(std::floor(u - 2.0 * scale)) + 1;
    std::vector<double> w(static_cast<std::size_t>(t.width));
    double sum = 0.0;
    for (int k = 0; k < t.width; ++k) {
      w[static_cast<std::size_t>(k)] = cubic_kernel((u - (base + k)) / scale);
      sum += w[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < t.width; ++k) {
      t.index.push_back(clamp_index(base + k, n_in));
      t.weight.push_back(static_cast<float>(w[static_cast<std::size_t>(k)] / sum));
    }
  }
  return t;
}

// Separable resample: rows first, then columns.
Tensor resample(const Tensor& image, const Taps& tx, const Taps& ty, int out_h, int out_w) {
  const int c_n = image.channels(), in_h = image.height(), in_w = image.width();
  Tensor tmp({c_n, in_h, out_w});
  Tensor out({c_n, out_h, out_w});
  for (int c = 0; c < c_n; ++c) {
    const float* src = image.plane(c);
    float* mid = tmp.plane(c);
    for (int y = 0; y < in_h; ++y) {
      const float* row = src + static_cast<std::size_t>(y) * in_w;
      float* dst = mid + static_cast<std::size_t>(y) * out_w;
      for (int x = 0; x < out_w; ++x) {
        float acc = 0.0f;
        for (int k = 0; k < tx.width; ++k) {
          const std::size_t n = static_cast<std::size_t>(x) * tx.width + k;
          acc += tx.weight[n] * row[tx.index[n]];
        }
        dst[x] = acc;
      }
    }
    float* dst = out.plane(c);
    for (int y = 0; y < out_h; ++y) {
      float* out_row = dst + static_cast<std::size_t>(y) * out_w;
      std::fill(out_row, out_row + out_w, 0.0f);
      for (int k = 0; k < ty.width; ++k) {
        const std::size_t n = static_cast<std::size_t>(y) * ty.width + k;
        const float w = ty.weight[n];
        const float* mid_row = mid + static_cast<std::size_t>(ty.index[n]) * out_w;
        for (int x = 0; x < out_w; ++x) out_row[x] += w * mid_row[x];
      }
    }
  }
  return out;
}

void check_image(const Tensor& image, int scale) {
  if (image.rank() != 3 || image.height() <= 0 || image.width() <= 0) {
    throw ConfigError("resize expects a non-empty CxHxW tensor, got " + shape_string(image.shape()));
  }
  if (scale < 1) throw ConfigError("resize scale must be >= 1");
}

}  // namespace

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  x = std::fabs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

Tensor bicubic_upscale(const Tensor& image, int scale) {
  check_image(image, scale);
  Tensor out = resample(image, upscale_taps(image.width(), scale), upscale_taps(image.height(), scale),
                        image.height() * scale, image.width() * scale);
  for (float& v : out.values()) v = std::clamp(v, 0.0f, 255.0f);
  return out;
}

std::uint64_t bicubic_upscale_flops(int channels, int h, int w, int scale) {
  const std::uint64_t out_w = static_cast<std::uint64_t>(w) * scale;
  const std::uint64_t out_h = static_cast<std::uint64_t>(h) * scale;
  const std::uint64_t macs = 4 * static_cast<std::uint64_t>(h) * out_w + 4 * out_h * out_w;
  return 2 * macs * static_cast<std::uint64_t>(channels);
}

Tensor bicubic_downscale(const Tensor& image, int scale) {
  check_image(image, scale);
  if (image.height() % scale != 0 || image.width() % scale != 0) {
    throw ConfigError("downscale: extent " + shape_string(image.shape()) + " not divisible by " + std::to_string(scale));
  }
  return resample(image, downscale_taps(image.width(), scale), downscale_taps(image.height(), scale),
                  image.height() / scale, image.width() / scale);
}

void quantize_8bit(Tensor& image) {
  for (float& v : image.values()) v = std::clamp(std::nearbyint(v), 0.0f, 255.0f);
}

ImagePair make_image_pair(const Tensor& hr, int scale) {
  if (scale <= 0) throw ConfigError("scale must be positive");
  if (hr.rank() != 3 || hr.channels() != 3) throw ConfigError("HR image must be 3xHxW, got " + shape_string(hr.shape()));
  const int h = hr.height() / scale * scale, w = hr.width() / scale * scale;
  if (h == 0 || w == 0) throw ConfigError("HR image " + shape_string(hr.shape()) + " is smaller than the scale");
  ImagePair pair;
  pair.hr = Tensor({3, h, w});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) pair.hr.at(c, y, x) = hr.at(c, y, x);
  pair.lr = bicubic_downscale(pair.hr, scale);
  quantize_8bit(pair.lr);
  return pair;
}

}  // namespace anysr
