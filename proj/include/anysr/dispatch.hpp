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

// Edge-to-PSNR lookup tables and the per-patch branch choice.
//
// Branch 0 is bicubic interpolation; branch j >= 1 is the subnet at
// widths[j-1]. Tables hold one row of K bin-averaged PSNRs per branch, and
// costs are FLOPs normalised by the full-width subnet.

#ifndef ANYSR_DISPATCH_HPP_
#define ANYSR_DISPATCH_HPP_

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "anysr/edge.hpp"
#include "anysr/resize.hpp"
#include "anysr/supernet.hpp"
#include "anysr/tensor.hpp"

namespace anysr {

struct EdgePsnrTables {
  double e_min = 0.0;
  double e_max = 1.0;
  int bins = 30;
  // psnr[j][k-1]: mean PSNR (dB) of branch j over validation patches in bin k.
  std::vector<std::vector<double>> psnr;
  // Samples per bin before empty-bin fill-in (identical for every branch).
  std::vector<int> counts;
  EdgeOperator edge_op = EdgeOperator::kLaplacian;
  int lr_patch = 32;
  std::vector<double> widths;
  std::string checkpoint;  // store_fingerprint of the weights that were measured

  int num_branches() const { return static_cast<int>(psnr.size()); }
  void validate() const;
  bool operator==(const EdgePsnrTables&) const = default;
};

struct CostSet {
  std::vector<double> cost;  // cost[j] for branch j; strictly increasing, last = 1

  void validate() const;
  bool operator==(const CostSet&) const = default;
};

// Bicubic cost for branch 0 and subnet FLOPs for the rest, all divided by the
// full-width FLOPs, for an lr_patch x lr_patch input.
CostSet make_costs(const SupernetConfig& config, int lr_patch);

// k-th (1-based) of K equal subintervals of [e_min, e_max].
std::pair<double, double> bin_bounds(double e_min, double e_max, int bins, int k);

// floor((e - e_min) * K / (e_max - e_min) + 1), clamped to [1, K].
int bin_index(double e, double e_min, double e_max, int bins);
int bin_index(double e, const EdgePsnrTables& tables);

// Bin-averaged PSNR from per-patch measurements. `psnr[j][i]` is branch j's
// PSNR on patch i with edge score scores[i]. Empty bins are filled by linear
// interpolation between the nearest non-empty bins (edge bins copy).
EdgePsnrTables tables_from_measurements(std::span<const double> scores,
                                        const std::vector<std::vector<double>>& psnr, int bins);

struct ValidationPatch {
  Tensor lr;  // 3 x p x p
  Tensor hr;  // 3 x scale*p x scale*p
};

// LR patches on the inference grid of each pair plus the matching HR crops.
// Images smaller than one patch are skipped.
std::vector<ValidationPatch> validation_patches(std::span<const ImagePair> pairs, int patch, int stride, int scale);

// Measures every branch on every validation patch, then bins by LR edge score.
EdgePsnrTables build_tables(const ParameterStore& store, std::span<const ValidationPatch> patches,
                            EdgeOperator op, int bins);

// argmax_j eta * psnr[j][k] - cost[j] at k = bin_index(e); ties go to the
// lowest-cost branch.
int select_branch(double e, const EdgePsnrTables& tables, const CostSet& costs, double eta);

// Manual-threshold baseline: edge-score quantiles split validation patches
// into `branches` equal-mass classes, assigned in cost order.
std::vector<double> quantile_thresholds(std::span<const double> scores, int branches);
// Number of thresholds <= e.
int select_by_threshold(double e, std::span<const double> thresholds);

void save_tables(const std::filesystem::path& path, const EdgePsnrTables& tables, const CostSet& costs);

struct TablesFile {
  EdgePsnrTables tables;
  CostSet costs;
};
TablesFile load_tables(const std::filesystem::path& path);

// Warns on `warn` and returns false when the tables were built for other
// weights; throws ConfigError when the width lists differ.
bool check_pairing(const EdgePsnrTables& tables, const ParameterStore& store, std::ostream& warn);

}  // namespace anysr

#endif  // ANYSR_DISPATCH_HPP_
