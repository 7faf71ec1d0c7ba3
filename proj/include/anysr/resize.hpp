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

#ifndef ANYSR_RESIZE_HPP_
#define ANYSR_RESIZE_HPP_

#include <cstdint>

#include "anysr/tensor.hpp"

namespace anysr {

// Cubic convolution kernel with a = -0.5 (Catmull-Rom / Keys).
double cubic_kernel(double x);

// Bicubic x`scale` upsampling of a CxHxW tensor with replicated borders.
// Output sample x maps to source coordinate (x + 0.5) / scale - 0.5; the
// result is clamped to [0, 255].
Tensor bicubic_upscale(const Tensor& image, int scale);

// Arithmetic cost of bicubic_upscale: 2 x (4 taps x rows x out_cols +
// 4 taps x out_rows x out_cols) per channel, matching its separable passes.
std::uint64_t bicubic_upscale_flops(int channels, int h, int w, int scale);

// Antialiased bicubic 1/`scale` downsampling (imresize-style: the kernel is
// stretched by `scale`). Borders replicate. Extents must be divisible by scale.
Tensor bicubic_downscale(const Tensor& image, int scale);

// Round to nearest and clamp to [0, 255], as if stored in an 8-bit file.
void quantize_8bit(Tensor& image);

struct ImagePair {
  Tensor lr;
  Tensor hr;
};

// Crops `hr` to a multiple of `scale` and derives its 8-bit LR counterpart.
ImagePair make_image_pair(const Tensor& hr, int scale);


}  // namespace anysr

#endif  // ANYSR_RESIZE_HPP_
