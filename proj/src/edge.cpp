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

#include "anysr/edge.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "anysr/error.hpp"

namespace anysr {
namespace {

using Kernel3 = std::array<std::array<float, 3>, 3>;

constexpr Kernel3 kLaplacian{{{0, 1, 0}, {1, -4, 1}, {0, 1, 0}}};
constexpr Kernel3 kSobelX{{{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}}};
constexpr Kernel3 kSobelY{{{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}}};
constexpr Kernel3 kPrewittX{{{-1, 0, 1}, {-1, 0, 1}, {-1, 0, 1}}};
constexpr Kernel3 kPrewittY{{{-1, -1, -1}, {0, 0, 0}, {1, 1, 1}}};

float apply(const Kernel3& k, const Tensor& g, int y, int x) {
  const int h = g.height(), w = g.width();
  float acc = 0.0f;
  for (int dy = -1; dy <= 1; ++dy) {
    const int yy = std::clamp(y + dy, 0, h - 1);
    for (int dx = -1; dx <= 1; ++dx) {
      const float kv = k[static_cast<std::size_t>(dy + 1)][static_cast<std::size_t>(dx + 1)];
      if (kv != 0.0f) acc += kv * g.at(0, yy, std::clamp(x + dx, 0, w - 1));
    }
  }
  return acc;
}

}  // namespace

std::string_view edge_operator_name(EdgeOperator op) {
  switch (op) {
    case EdgeOperator::kLaplacian: return "laplacian";
    case EdgeOperator::kSobel: return "sobel";
    case EdgeOperator::kPrewitt: return "prewitt";
  }
  return "unknown";
}

EdgeOperator parse_edge_operator(std::string_view name) {
  if (name == "laplacian") return EdgeOperator::kLaplacian;
  if (name == "sobel") return EdgeOperator::kSobel;
  if (name == "prewitt") return EdgeOperator::kPrewitt;
  throw ConfigError("unknown edge operator '" + std::string(name) + "' (laplacian|sobel|prewitt)");
}

Tensor to_gray(const Tensor& patch) {
  if (patch.rank() != 3 || patch.channels() != 3) throw ConfigError("to_gray expects a 3xhxw patch");
  Tensor g({1, patch.height(), patch.width()});
  const std::size_t n = g.size();
  const float* r = patch.plane(0);
  const float* gr = patch.plane(1);
  const float* b = patch.plane(2);
  for (std::size_t i = 0; i < n; ++i) g[i] = 0.299f * r[i] + 0.587f * gr[i] + 0.114f * b[i];
  return g;
}

Tensor edge_map(const Tensor& gray, EdgeOperator op) {
  if (gray.rank() != 3 || gray.channels() != 1 || gray.empty()) throw ConfigError("edge_map expects a 1xhxw image");
  Tensor out(gray.shape());
  const Kernel3* kx = op == EdgeOperator::kSobel ? &kSobelX : &kPrewittX;
  const Kernel3* ky = op == EdgeOperator::kSobel ? &kSobelY : &kPrewittY;
  for (int y = 0; y < gray.height(); ++y)
    for (int x = 0; x < gray.width(); ++x) {
      if (op == EdgeOperator::kLaplacian) {
        out.at(0, y, x) = std::fabs(apply(kLaplacian, gray, y, x));
      } else {
        const float gx = apply(*kx, gray, y, x), gy = apply(*ky, gray, y, x);
        out.at(0, y, x) = std::sqrt(gx * gx + gy * gy);
      }
    }
  return out;
}

double edge_score(const Tensor& patch, EdgeOperator op) {
  const Tensor e = edge_map(to_gray(patch), op);
  double sum = 0.0;
  for (float v : e.values()) sum += v;
  return sum / static_cast<double>(e.size());
}

}  // namespace anysr
