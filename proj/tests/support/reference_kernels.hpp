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

// Double-precision loop definitions of the convolution kernels, used as
// oracles by the unit and acceptance tests.

#ifndef ANYSR_TESTS_SUPPORT_REFERENCE_KERNELS_HPP_
#define ANYSR_TESTS_SUPPORT_REFERENCE_KERNELS_HPP_

#include <vector>

#include "anysr/nn.hpp"

namespace anysr::testing {

// Direct six-loop definition, accumulated in double.
inline std::vector<double> conv_oracle(const std::vector<double>& in, int ic, int h, int w, const std::vector<double>& k,
                                const std::vector<double>& bias, const ConvSpec& s) {
  const int oh = s.output_height(h), ow = s.output_width(w);
  std::vector<double> out(static_cast<std::size_t>(s.out_channels) * oh * ow);
  for (int o = 0; o < s.out_channels; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = bias[o];
        for (int i = 0; i < ic; ++i)
          for (int ky = 0; ky < s.kernel_h; ++ky)
            for (int kx = 0; kx < s.kernel_w; ++kx) {
              const int iy = y * s.stride - s.padding + ky, ix = x * s.stride - s.padding + kx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += k[((static_cast<std::size_t>(o) * ic + i) * s.kernel_h + ky) * s.kernel_w + kx] *
                     in[(static_cast<std::size_t>(i) * h + iy) * w + ix];
            }
        out[(static_cast<std::size_t>(o) * oh + y) * ow + x] = acc;
      }
  return out;
}

// Transposed conv as the scatter of every input pixel through the kernel.
inline std::vector<double> deconv_oracle(const std::vector<double>& in, int ic, int h, int w, const std::vector<double>& k,
                                  const std::vector<double>& bias, const ConvSpec& s) {
  const int oh = s.output_height(h), ow = s.output_width(w);
  std::vector<double> out(static_cast<std::size_t>(s.out_channels) * oh * ow);
  for (int o = 0; o < s.out_channels; ++o)
    for (std::size_t n = 0; n < static_cast<std::size_t>(oh) * ow; ++n) out[o * static_cast<std::size_t>(oh) * ow + n] = bias[o];
  for (int o = 0; o < s.out_channels; ++o)
    for (int i = 0; i < ic; ++i)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          for (int ky = 0; ky < s.kernel_h; ++ky)
            for (int kx = 0; kx < s.kernel_w; ++kx) {
              const int oy = y * s.stride + ky - s.padding, ox = x * s.stride + kx - s.padding;
              if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
              out[(static_cast<std::size_t>(o) * oh + oy) * ow + ox] +=
                  k[((static_cast<std::size_t>(o) * ic + i) * s.kernel_h + ky) * s.kernel_w + kx] *
                  in[(static_cast<std::size_t>(i) * h + y) * w + x];
            }
  return out;
}

inline std::vector<double> layer_oracle(const std::vector<double>& in, int ic, int h, int w, const std::vector<double>& k,
                                 const std::vector<double>& bias, const ConvSpec& s) {
  return s.transposed ? deconv_oracle(in, ic, h, w, k, bias, s) : conv_oracle(in, ic, h, w, k, bias, s);
}

}  // namespace anysr::testing

#endif  // ANYSR_TESTS_SUPPORT_REFERENCE_KERNELS_HPP_
