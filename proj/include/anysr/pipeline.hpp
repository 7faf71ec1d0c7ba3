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

#ifndef ANYSR_PIPELINE_HPP_
#define ANYSR_PIPELINE_HPP_

#include <cstdint>
#include <ostream>
#include <vector>

#include "anysr/dispatch.hpp"
#include "anysr/edge.hpp"
#include "anysr/supernet.hpp"
#include "anysr/tensor.hpp"

namespace anysr {

struct PatchOrigin {
  int y = 0;
  int x = 0;
  bool operator==(const PatchOrigin&) const = default;
};

// Fixed-size LR tiling. Origins step by `stride`; the last row/column is
// shifted back to H-p / W-p so every patch is exactly p x p and the union
// covers the image.
struct PatchGrid {
  int patch = 32;
  int stride = 32;
  int height = 0;
  int width = 0;
  std::vector<PatchOrigin> origins;  // row-major
};

PatchGrid make_grid(int height, int width, int patch, int stride);

struct SplitResult {
  PatchGrid grid;
  std::vector<Tensor> patches;
};
SplitResult split(const Tensor& image, int patch, int stride);

// Bicubic interpolation branch (values clamped to [0,255]).
Tensor interp_upscale(const Tensor& patch, int scale);

// SR of one LR patch by branch j: 0 = interpolation, j >= 1 = subnet at
// widths[j-1]. Output is clamped to [0,255].
Tensor run_branch(const ParameterStore& store, int branch, const Tensor& lr_patch);

// Uniform average of overlapping SR patches.
Tensor merge(const PatchGrid& grid, const std::vector<Tensor>& sr_patches, int scale);

// Incremental form of merge(); patches may be added in any order, but the
// result is only bit-identical to merge() when added in grid order.
class MergeAccumulator {
 public:
  MergeAccumulator(const PatchGrid& grid, int channels, int scale);
  void add(std::size_t patch_index, const Tensor& sr_patch);
  // Throws if any output pixel received no patch.
  Tensor finish() const;

 private:
  const PatchGrid* grid_;
  int scale_;
  Tensor sum_;
  std::vector<float> weight_;
};

struct SrReport {
  std::vector<int> branch_counts;  // indexed by branch
  int total_patches = 0;
  double avg_flops = 0.0;          // per LR patch
};

// sum_j count_j * cost_j * full_flops / total.
double avg_flops(const SrReport& report, const CostSet& costs, double full_flops);

struct RoutingEntry {
  PatchOrigin origin;
  double edge_score = 0.0;
  int branch = 0;
};

struct SrOptions {
  int patch = 32;
  int stride = 32;
};

struct SrResult {
  Tensor image;  // 3 x scale*H x scale*W, in [0,255]
  SrReport report;
  std::vector<RoutingEntry> routing;
};

// Splits, routes every patch through select_branch at `eta`, super-resolves
// and merges.
SrResult sr_image(const Tensor& image, const ParameterStore& store, const EdgePsnrTables& tables,
                  const CostSet& costs, double eta, EdgeOperator op, const SrOptions& options = {});

// Same pipeline with an explicit branch per patch (e.g. threshold baseline).
SrResult sr_image_routed(const ParameterStore& store, const CostSet& costs,
                         const PatchGrid& grid, const std::vector<Tensor>& patches,
                         const std::vector<RoutingEntry>& routing);

void write_report(std::ostream& os, const SrReport& report);
// "total_patches,avg_flops,count_branch0,...,count_branchM" header + one row.
void write_report_csv(std::ostream& os, const SrReport& report);
// "y,x,edge_score,branch" per patch.
void write_routing_csv(std::ostream& os, const std::vector<RoutingEntry>& routing);

}  // namespace anysr

#endif  // ANYSR_PIPELINE_HPP_
