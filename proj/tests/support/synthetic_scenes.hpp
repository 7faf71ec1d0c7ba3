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

// Procedural RGB scenes for tests and the demo corpus: smooth gradients
// (easy for interpolation) mixed with hard-edged shapes, stripes and
// checkerboards (where a learned upsampler pays off).

#ifndef ANYSR_TESTS_SUPPORT_SYNTHETIC_SCENES_HPP_
#define ANYSR_TESTS_SUPPORT_SYNTHETIC_SCENES_HPP_

#include <cstdint>
#include <vector>

#include "anysr/tensor.hpp"

namespace anysr::testing {

struct SceneOptions {
  int height = 256;
  int width = 256;
  // Fraction of the image area covered by detail; drawn per image in
  // [min_detail, max_detail].
  double min_detail = 0.0;
  double max_detail = 1.0;
  double noise_sigma = 0.8;
};

// Deterministic for a given seed; values are 8-bit integers in [0,255].
Tensor synthetic_scene(std::uint64_t seed, const SceneOptions& options = {});

std::vector<Tensor> synthetic_corpus(int count, std::uint64_t seed, const SceneOptions& options = {});

}  // namespace anysr::testing

#endif  // ANYSR_TESTS_SUPPORT_SYNTHETIC_SCENES_HPP_
