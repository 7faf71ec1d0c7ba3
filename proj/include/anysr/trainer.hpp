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

// Supernet training: patch extraction, FLOPs-weighted subnet sampling and
// single-subnet Adam steps that only touch the sampled channel slice.

#ifndef ANYSR_TRAINER_HPP_
#define ANYSR_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "anysr/nn.hpp"
#include "anysr/supernet.hpp"
#include "anysr/tensor.hpp"

namespace anysr {

struct PatchPair {
  Tensor lr;  // 3 x p x p
  Tensor hr;  // 3 x scale*p x scale*p
  int hr_y = 0;  // origin of the HR crop in its source image
  int hr_x = 0;
  int image_index = 0;
};

struct PatchDataset {
  std::vector<PatchPair> pairs;
  int lr_patch = 32;
  int scale = 4;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

// HR crops of scale*p on an HR-space grid with step `stride`; each LR patch is
// the bicubic-downscaled crop rounded to 8 bits. Images smaller than scale*p
// are skipped with a warning on `warn` (if non-null).
PatchDataset prepare_patches(std::span<const Tensor> hr_images, int lr_patch, int scale, int stride,
                             std::ostream* warn = nullptr);

struct SamplerConfig {
  double exponent = 2.0;
};

// p_j = f_j^n / sum_k f_k^n. Ratios are taken relative to the largest entry
// so large exponents do not overflow.
std::vector<double> sampling_probabilities(std::span<const double> flops, double exponent);

// Categorical draw returning a 1-based subnet index (0 is the interpolation
// branch, which has no weights and is never trained).
int sample_subnet(std::span<const double> probs, std::mt19937_64& rng);

struct TrainConfig {
  int epochs = 20;
  int batch = 16;
  AdamOptions adam;  // lr is the base learning rate
  std::vector<int> lr_decay_epochs{10, 15};
  float lr_decay = 0.5f;
  std::uint64_t seed = 1;
  bool augment = true;
  float grad_clip = 0.0f;  // global L2 norm; 0 disables
  // Learning-rate multiplier of the final upsampling layer. FSRCNN trains its
  // deconvolution ten times slower than the conv stack.
  float upsample_lr_scale = 0.1f;

  void validate() const;
  float learning_rate(int epoch) const;
};

// Adam over the whole store plus cached per-subnet slice masks.
class SupernetOptimizer {
 public:
  SupernetOptimizer(const ParameterStore& store, AdamOptions options, float grad_clip = 0.0f,
                    float upsample_lr_scale = 1.0f);

  AdamOptions& options() { return options_; }
  const AdamState& state() const { return state_; }
  float grad_clip() const { return grad_clip_; }

  // Applies `grads` to the slice of subnet `branch` (1-based).
  void step(ParameterStore& store, int branch, StoreGrads& grads);

 private:
  AdamOptions options_;
  float grad_clip_;
  float upsample_lr_scale_;
  AdamState state_;
  std::vector<SliceMask> masks_;
};

// Forward at the branch's width, mean L1 against the HR patches (both scaled
// to [0,1]), backward, one optimizer step. Returns the batch loss; throws
// NumericError when it is not finite.
float train_step(ParameterStore& store, std::span<const PatchPair> batch, int branch, SupernetOptimizer& optimizer);

// Rotates by rot*90 degrees and flips; applied identically to LR and HR.
Tensor augment_tensor(const Tensor& t, int rot, bool hflip, bool vflip);

struct TrainLog {
  std::vector<float> loss;   // one entry per iteration
  std::vector<int> branch;   // sampled subnet per iteration
};

using EpochCallback = std::function<void(int epoch, const TrainLog& log)>;

// epochs * ceil(|dataset| / batch) iterations, each on one sampled subnet.
TrainLog train(ParameterStore& store, const PatchDataset& dataset, const TrainConfig& config,
               const SamplerConfig& sampler, const EpochCallback& on_epoch = {});

}  // namespace anysr

#endif  // ANYSR_TRAINER_HPP_
