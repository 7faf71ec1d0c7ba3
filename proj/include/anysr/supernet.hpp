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

// FSRCNN-style backbone whose narrower subnets are channel-prefix slices of
// one shared parameter store.
//
//   feature  5x5  3 -> D   PReLU
//   shrink   1x1  D -> d   PReLU
//   map x m  3x3  d -> d   PReLU
//   expand   1x1  d -> D   PReLU
//   upsample 9x9  D -> 3   transposed, stride = scale
//
// A subnet of width multiplier a uses hidden widths max(1, round(a*D)) and
// max(1, round(a*d)); colour input/output channels are never sliced.

#ifndef ANYSR_SUPERNET_HPP_
#define ANYSR_SUPERNET_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anysr/nn.hpp"
#include "anysr/tensor.hpp"

namespace anysr {

struct SupernetConfig {
  int base_width = 56;
  int shrink_width = 12;
  int mapping_depth = 4;
  int scale = 4;
  int color_channels = 3;
  std::vector<double> widths{0.29, 0.46, 1.0};
  // Adds the bicubic upscale of the input to the network output, so the
  // layers learn a residual over interpolation.
  bool global_skip = true;

  void validate() const;
  int num_subnets() const { return static_cast<int>(widths.size()); }
  int num_layers() const { return mapping_depth + 4; }
  // Index into widths of a multiplier; throws ConfigError when not configured.
  int width_index(double alpha) const;

  // Human-readable "key = value" lines; parse rejects unknown or missing keys.
  std::string to_text() const;
  static SupernetConfig parse(const std::string& text);

  bool operator==(const SupernetConfig&) const = default;
};

// max(1, round(alpha * channels)).
int sliced_channels(double alpha, int channels);

// Per-layer geometry of the subnet at `alpha` (1.0 = full store shapes).
std::vector<ConvSpec> layer_specs(const SupernetConfig& config, double alpha);

// Every weight of the supernet. Subnets never own parameters of their own.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(SupernetConfig config, std::vector<LayerWeights> layers);

  const SupernetConfig& config() const { return config_; }
  const std::vector<LayerWeights>& layers() const { return layers_; }
  std::vector<LayerWeights>& mutable_layers() { return layers_; }
  std::size_t parameter_count() const;

  bool operator==(const ParameterStore&) const = default;

 private:
  SupernetConfig config_;
  std::vector<LayerWeights> layers_;
};

// Deterministic He-normal init from `seed`; biases 0, PReLU slopes 0.25.
ParameterStore build_supernet(const SupernetConfig& config, std::uint64_t seed);

// Read-only width-alpha view over a store.
class SubnetView {
 public:
  SubnetView(const ParameterStore& store, double alpha);

  double alpha() const { return alpha_; }
  const std::vector<ConvSpec>& specs() const { return specs_; }
  // Channel-prefix slice [0:out, 0:in] of layer l (materialised on demand).
  LayerWeights sliced_layer(int l) const;

 private:
  const ParameterStore* store_;
  double alpha_;
  std::vector<ConvSpec> specs_;
};

// Super-resolves a 3xhxw patch with values in [0,255]; returns
// 3x(scale*h)x(scale*w), unclamped.
Tensor supernet_forward(const ParameterStore& store, double alpha, const Tensor& patch);

// Activations kept for the backward pass. Inputs are in [0,1] units.
struct ForwardTrace {
  double alpha = 1.0;
  std::vector<LayerWeights> weights;  // sliced
  std::vector<ConvSpec> specs;
  std::vector<Tensor> layer_inputs;   // input of each conv layer
  std::vector<Tensor> pre_activation; // conv output before PReLU
  Tensor output;
};

ForwardTrace forward_trace(const ParameterStore& store, double alpha, const Tensor& normalized_patch);

// Full-store-shaped gradients; entries outside the traced slice are zero.
struct StoreGrads {
  std::vector<std::vector<float>> kernel;
  std::vector<std::vector<float>> bias;
  std::vector<std::vector<float>> slope;

  static StoreGrads zeros_like(const ParameterStore& store);
  void add(const StoreGrads& other);
  void scale(float s);
};

// Backpropagates grad_output (d loss / d trace.output) and accumulates the
// parameter gradients into `grads`.
void backward_into(const ParameterStore& store, const ForwardTrace& trace, const Tensor& grad_output,
                   StoreGrads& grads);

// Per-layer membership masks (1 = inside the alpha slice) in store layout.
struct SliceMask {
  std::vector<std::vector<std::uint8_t>> kernel;
  std::vector<std::vector<std::uint8_t>> bias;
  std::vector<std::vector<std::uint8_t>> slope;
};
SliceMask slice_mask(const ParameterStore& store, double alpha);

// Multiply-accumulates of one layer at input extent (h, w). The transposed
// layer is counted on its output grid: k*k*Cin*Cout*Hout*Wout.
std::uint64_t layer_macs(const ConvSpec& spec, int in_h, int in_w);

// 2 x MACs over every conv layer of the alpha subnet for an LR input of
// h x w. Bias and activation work is not counted.
std::uint64_t subnet_flops(const SupernetConfig& config, double alpha, int lr_h, int lr_w);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store);
ParameterStore load_checkpoint(const std::filesystem::path& path);
// Also rejects a checkpoint whose embedded config differs from `expected`.
ParameterStore load_checkpoint(const std::filesystem::path& path, const SupernetConfig& expected);

// CRC32 (hex) of the serialized checkpoint payload; pairs lookup tables with
// the weights they were measured on.
std::string store_fingerprint(const ParameterStore& store);

}  // namespace anysr

#endif  // ANYSR_SUPERNET_HPP_
