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

// Minimal dense kernels for the super-resolution backbone: direct and
// transposed 2-D convolution, PReLU, mean-absolute-error loss and Adam.
// Kernels are stored (out, in, kh, kw) for both convolution flavours.

#ifndef ANYSR_NN_HPP_
#define ANYSR_NN_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "anysr/tensor.hpp"

namespace anysr {

struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int padding = 0;
  // Transposed only: extra trailing rows/cols kept from the uncropped output.
  int output_padding = 0;
  bool transposed = false;

  // Direct:     floor((in + 2*pad - k) / stride) + 1
  // Transposed: (in - 1)*stride - 2*pad + k + output_padding
  //
  // The x4 upsampler uses k=9, stride=4, pad=3, output_padding=1: the
  // uncropped output is (in-1)*4 + 9 wide; 3 leading rows/cols are cropped
  // and exactly 4*in are kept, so 32 -> 128.
  int output_extent(int in, int k) const;
  int output_height(int in_h) const { return output_extent(in_h, kernel_h); }
  int output_width(int in_w) const { return output_extent(in_w, kernel_w); }

  void validate() const;
};

struct LayerWeights {
  Tensor kernel;                   // (out, in, kh, kw)
  std::vector<float> bias;         // out
  std::vector<float> prelu_slope;  // out, or empty when the layer has no activation

  int out_channels() const { return kernel.dim(0); }
  int in_channels() const { return kernel.dim(1); }
  bool has_activation() const { return !prelu_slope.empty(); }
  std::size_t parameter_count() const { return kernel.size() + bias.size() + prelu_slope.size(); }

  // Throws ConfigError when kernel/bias/slope extents disagree or do not match spec.
  void validate(const ConvSpec& spec) const;

  bool operator==(const LayerWeights&) const = default;
};

struct ConvGrads {
  Tensor input;                // same shape as the forward input
  Tensor kernel;               // same shape as LayerWeights::kernel
  std::vector<float> bias;
};

Tensor conv2d_forward(const Tensor& input, const LayerWeights& w, const ConvSpec& spec);
ConvGrads conv2d_backward(const Tensor& input, const LayerWeights& w, const ConvSpec& spec,
                          const Tensor& grad_out);

Tensor deconv_forward(const Tensor& input, const LayerWeights& w, const ConvSpec& spec);
ConvGrads deconv_backward(const Tensor& input, const LayerWeights& w, const ConvSpec& spec,
                          const Tensor& grad_out);

// Dispatches on spec.transposed.
Tensor layer_forward(const Tensor& input, const LayerWeights& w, const ConvSpec& spec);
ConvGrads layer_backward(const Tensor& input, const LayerWeights& w, const ConvSpec& spec,
                         const Tensor& grad_out);

struct PreluGrads {
  Tensor input;
  std::vector<float> slope;
};

// out = x for x >= 0, slope[c] * x otherwise.
Tensor prelu_forward(const Tensor& input, std::span<const float> slope);
PreluGrads prelu_backward(const Tensor& input, std::span<const float> slope, const Tensor& grad_out);

// Mean absolute error over every element.
float l1_loss(const Tensor& pred, const Tensor& target);
// d(l1_loss)/d(pred); zero where pred == target.
Tensor l1_loss_backward(const Tensor& pred, const Tensor& target);

struct AdamOptions {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// One parameter buffer with its gradient. `present` selects the entries that
// received a gradient this step (empty = all); other entries and their
// moments are left untouched.
struct ParamGroup {
  std::span<float> value;
  std::span<const float> grad;
  std::span<const std::uint8_t> present;
  float lr_scale = 1.0f;  // multiplies AdamOptions::lr for this group
};

struct AdamState {
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
  std::int64_t step = 0;
};

// Bias-corrected Adam update. Moments are sized on the first call and must
// keep matching the groups afterwards.
void adam_step(std::span<const ParamGroup> groups, AdamState& state, const AdamOptions& opt);

// He-normal init: std = gain * sqrt(1 / fan_in).
void kaiming_normal(Tensor& kernel, double fan_in, double gain, std::mt19937_64& rng);

}  // namespace anysr

#endif  // ANYSR_NN_HPP_
