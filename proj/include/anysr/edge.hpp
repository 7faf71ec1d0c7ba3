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

#ifndef ANYSR_EDGE_HPP_
#define ANYSR_EDGE_HPP_

#include <string>
#include <string_view>

#include "anysr/tensor.hpp"

namespace anysr {

enum class EdgeOperator { kLaplacian, kSobel, kPrewitt };

std::string_view edge_operator_name(EdgeOperator op);
// Accepts "laplacian", "sobel", "prewitt"; throws ConfigError otherwise.
EdgeOperator parse_edge_operator(std::string_view name);

// Rec.601 luma of a 3xhxw patch in [0,255]; returns 1xhxw.
Tensor to_gray(const Tensor& patch);

// Laplacian: |4-neighbour Laplacian|. Sobel/Prewitt: sqrt(gx^2 + gy^2).
// Borders replicate the nearest pixel. Input and output are 1xhxw.
Tensor edge_map(const Tensor& gray, EdgeOperator op);

// Mean of edge_map(to_gray(patch)).
double edge_score(const Tensor& patch, EdgeOperator op = EdgeOperator::kLaplacian);

}  // namespace anysr

#endif  // ANYSR_EDGE_HPP_
