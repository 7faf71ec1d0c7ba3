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

#include "anysr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "anysr/error.hpp"
#include "anysr/parallel.hpp"
#include "anysr/resize.hpp"

namespace anysr {
namespace {

Tensor crop(const Tensor& image, int y0, int x0, int h, int w) {
  Tensor out({image.channels(), h, w});
  for (int c = 0; c < image.channels(); ++c)
    for (int y = 0; y < h; ++y) {
      const float* src = image.plane(c) + static_cast<std::size_t>(y0 + y) * image.width() + x0;
      std::copy(src, src + w, out.plane(c) + static_cast<std::size_t>(y) * w);
    }
  return out;
}

Tensor scaled(const Tensor& t, float s) {
  Tensor out = t;
  for (float& v : out.values()) v *= s;
  return out;
}

// Uniform double in [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n));
}

}  // namespace

PatchDataset prepare_patches(std::span<const Tensor> hr_images, int lr_patch, int scale, int stride,
                             std::ostream* warn) {
  if (lr_patch <= 0 || scale <= 0 || stride <= 0) throw ConfigError("patch size, scale and stride must be positive");
  PatchDataset ds;
  ds.lr_patch = lr_patch;
  ds.scale = scale;
  const int hr_patch = lr_patch * scale;
  for (std::size_t n = 0; n < hr_images.size(); ++n) {
    const Tensor& img = hr_images[n];
    if (img.rank() != 3 || img.height() < hr_patch || img.width() < hr_patch) {
      if (warn) {
        *warn << "warning: image " << n << " " << shape_string(img.shape()) << " is smaller than the "
              << hr_patch << "x" << hr_patch << " HR patch; skipped\n";
      }
      continue;
    }
    for (int y = 0; y + hr_patch <= img.height(); y += stride) {
      for (int x = 0; x + hr_patch <= img.width(); x += stride) {
        PatchPair p;
        p.hr = crop(img, y, x, hr_patch, hr_patch);
        p.lr = bicubic_downscale(p.hr, scale);
        quantize_8bit(p.lr);
        p.hr_y = y;
        p.hr_x = x;
        p.image_index = static_cast<int>(n);
        ds.pairs.push_back(std::move(p));
      }
    }
  }
  return ds;
}

std::vector<double> sampling_probabilities(std::span<const double> flops, double exponent) {
  if (flops.empty()) throw ConfigError("sampling_probabilities: empty FLOPs list");
  if (exponent < 0.0 || !std::isfinite(exponent)) throw ConfigError("sampling exponent must be finite and >= 0");
  double largest = 0.0;
  for (double f : flops) {
    if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("sampling_probabilities: FLOPs must be positive");
    largest = std::max(largest, f);
  }
  std::vector<double> p;
  double sum = 0.0;
  for (double f : flops) {
    p.push_back(std::pow(f / largest, exponent));
    sum += p.back();
  }
  for (double& v : p) v /= sum;
  return p;
}

int sample_subnet(std::span<const double> probs, std::mt19937_64& rng) {
  if (probs.empty()) throw ConfigError("sample_subnet: empty probability vector");
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  int last_positive = 1;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] > 0.0) last_positive = static_cast<int>(j) + 1;
    acc += probs[j];
    if (u < acc) return static_cast<int>(j) + 1;
  }
  return last_positive;
}

void TrainConfig::validate() const {
  if (epochs <= 0 || batch <= 0) throw ConfigError("epochs and batch must be positive");
  if (!(adam.lr >= 0.0f)) throw ConfigError("learning rate must be non-negative");
  if (grad_clip < 0.0f) throw ConfigError("grad_clip must be non-negative");
  if (!(upsample_lr_scale > 0.0f)) throw ConfigError("upsample_lr_scale must be positive");
}

float TrainConfig::learning_rate(int epoch) const {
  float lr = adam.lr;
  for (int e : lr_decay_epochs)
    if (epoch >= e) lr *= lr_decay;
  return lr;
}

SupernetOptimizer::SupernetOptimizer(const ParameterStore& store, AdamOptions options, float grad_clip,
                                     float upsample_lr_scale)
    : options_(options), grad_clip_(grad_clip), upsample_lr_scale_(upsample_lr_scale) {
  if (!(upsample_lr_scale > 0.0f)) throw ConfigError("upsample lr scale must be positive");
  for (double a : store.config().widths) masks_.push_back(slice_mask(store, a));
}

void SupernetOptimizer::step(ParameterStore& store, int branch, StoreGrads& grads) {
  if (branch < 1 || branch > static_cast<int>(masks_.size())) {
    throw ConfigError("optimizer step: subnet index " + std::to_string(branch) + " out of range");
  }
  const SliceMask& mask = masks_[static_cast<std::size_t>(branch - 1)];
  if (grad_clip_ > 0.0f) {
    double sq = 0.0;
    for (auto* group : {&grads.kernel, &grads.bias, &grads.slope})
      for (const auto& v : *group)
        for (float g : v) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (norm > grad_clip_) grads.scale(static_cast<float>(grad_clip_ / norm));
  }
  std::vector<ParamGroup> groups;
  auto& layers = store.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const float scale = l + 1 == layers.size() ? upsample_lr_scale_ : 1.0f;
    groups.push_back({layers[l].kernel.values(), grads.kernel[l], mask.kernel[l], scale});
    groups.push_back({layers[l].bias, grads.bias[l], mask.bias[l], scale});
    if (layers[l].has_activation()) groups.push_back({layers[l].prelu_slope, grads.slope[l], mask.slope[l]});
  }
  adam_step(groups, state_, options_);
}

float train_step(ParameterStore& store, std::span<const PatchPair> batch, int branch, SupernetOptimizer& optimizer) {
  const SupernetConfig& cfg = store.config();
  if (batch.empty()) throw ConfigError("train_step: empty batch");
  if (branch < 1 || branch > cfg.num_subnets()) {
    throw ConfigError("train_step: subnet index " + std::to_string(branch) + " out of range");
  }
  const double alpha = cfg.widths[static_cast<std::size_t>(branch - 1)];

  std::vector<StoreGrads> per_sample(batch.size());
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), [&](std::size_t b) {
    const ForwardTrace trace = forward_trace(store, alpha, scaled(batch[b].lr, 1.0f / 255.0f));
    const Tensor target = scaled(batch[b].hr, 1.0f / 255.0f);
    losses[b] = l1_loss(trace.output, target);
    per_sample[b] = StoreGrads::zeros_like(store);
    backward_into(store, trace, l1_loss_backward(trace.output, target), per_sample[b]);
  });

  double loss = 0.0;
  for (double l : losses) loss += l;
  loss /= static_cast<double>(batch.size());
  if (!std::isfinite(loss)) {
    std::ostringstream os;
    os << "non-finite training loss " << loss << " at width " << alpha << " (subnet " << branch << ", batch of "
       << batch.size() << ")";
    throw NumericError(os.str());
  }
  StoreGrads total = std::move(per_sample[0]);
  for (std::size_t b = 1; b < per_sample.size(); ++b) total.add(per_sample[b]);
  total.scale(1.0f / static_cast<float>(batch.size()));
  optimizer.step(store, branch, total);
  return static_cast<float>(loss);
}

Tensor augment_tensor(const Tensor& t, int rot, bool hflip, bool vflip) {
  Tensor cur = t;
  for (int r = 0; r < ((rot % 4) + 4) % 4; ++r) {
    const int h = cur.height(), w = cur.width();
    Tensor next({cur.channels(), w, h});
    for (int c = 0; c < cur.channels(); ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) next.at(c, w - 1 - x, y) = cur.at(c, y, x);
    cur = std::move(next);
  }
  if (hflip || vflip) {
    const int h = cur.height(), w = cur.width();
    Tensor next(cur.shape());
    for (int c = 0; c < cur.channels(); ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) next.at(c, vflip ? h - 1 - y : y, hflip ? w - 1 - x : x) = cur.at(c, y, x);
    cur = std::move(next);
  }
  return cur;
}

TrainLog train(ParameterStore& store, const PatchDataset& dataset, const TrainConfig& config,
               const SamplerConfig& sampler, const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.empty()) throw ConfigError("train: empty dataset");
  const SupernetConfig& cfg = store.config();
  if (dataset.scale != cfg.scale) throw ConfigError("train: dataset scale does not match the supernet");

  std::vector<double> flops;
  for (double a : cfg.widths) flops.push_back(static_cast<double>(subnet_flops(cfg, a, 32, 32)));
  const std::vector<double> probs = sampling_probabilities(flops, sampler.exponent);

  std::mt19937_64 rng(config.seed);
  SupernetOptimizer optimizer(store, config.adam, config.grad_clip, config.upsample_lr_scale);
  TrainLog log;
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = static_cast<std::size_t>(config.batch);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    optimizer.options().lr = config.learning_rate(epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<PatchPair> items;
      items.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const PatchPair& src = dataset.pairs[order[k]];
        if (!config.augment) {
          items.push_back(src);
          continue;
        }
        const int rot = static_cast<int>(uniform_below(rng, 4));
        const bool hf = uniform_below(rng, 2) == 1;
        const bool vf = uniform_below(rng, 2) == 1;
        items.push_back({augment_tensor(src.lr, rot, hf, vf), augment_tensor(src.hr, rot, hf, vf), src.hr_y, src.hr_x,
                         src.image_index});
      }
      const int branch = sample_subnet(probs, rng);
      log.loss.push_back(train_step(store, items, branch, optimizer));
      log.branch.push_back(branch);
    }
    if (on_epoch) on_epoch(epoch, log);
  }
  return log;
}

}  // namespace anysr
