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

#ifndef ANYSR_METRICS_HPP_
#define ANYSR_METRICS_HPP_

#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "anysr/dispatch.hpp"
#include "anysr/edge.hpp"
#include "anysr/resize.hpp"
#include "anysr/supernet.hpp"
#include "anysr/tensor.hpp"

namespace anysr {

inline constexpr double kPsnrCap = 100.0;

// 10 log10(peak^2 / MSE) over every channel and pixel, capped at 100 dB.
double psnr(const Tensor& a, const Tensor& b, double peak = 255.0);
// Same on the BT.601 luma (16-235 studio swing) of two RGB images.
double psnr_y(const Tensor& a, const Tensor& b);

// Pearson correlation of fractional ranks (ties get their average rank).
// Returns 0 when either input is constant.
double spearman(std::span<const double> xs, std::span<const double> ys);

struct EvalRow {
  double eta = 0.0;         // NaN for rows produced by a fixed routing policy
  double mean_psnr_db = 0.0;  // averaged over images
  double mean_flops = 0.0;    // averaged over all LR patches
  std::vector<double> usage;  // fraction of patches per branch
};

struct EvalOptions {
  int patch = 32;
  int stride = 32;
  bool y_channel = false;
};

// Maps a patch's LR edge score to a branch.
using RoutingPolicy = std::function<int(double edge_score)>;

// One row per policy; every branch output is computed at most once per patch.
std::vector<EvalRow> evaluate_policies(std::span<const ImagePair> data, const ParameterStore& store,
                                       const CostSet& costs, std::span<const RoutingPolicy> policies,
                                       EdgeOperator op, const EvalOptions& options = {});

// One row per eta, routing with select_branch; rows keep the order of `etas`.
std::vector<EvalRow> evaluate(std::span<const ImagePair> data, const ParameterStore& store,
                              const EdgePsnrTables& tables, const CostSet& costs, std::span<const double> etas,
                              EdgeOperator op, const EvalOptions& options = {});

// Header `eta,mean_psnr_db,mean_flops,frac_branch0,...,frac_branchM`.
void write_eval_csv(std::ostream& os, std::span<const EvalRow> rows);

}  // namespace anysr

#endif  // ANYSR_METRICS_HPP_
