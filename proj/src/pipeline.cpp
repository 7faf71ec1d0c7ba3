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

#include "anysr/pipeline.hpp"

#include <algorithm>
#include <iomanip>

#include "anysr/error.hpp"
#include "anysr/parallel.hpp"
#include "anysr/resize.hpp"

namespace anysr {
namespace {

std::vector<int> axis_origins(int extent, int patch, int stride) {
  std::vector<int> o;
  for (int v = 0;; v += stride) {
    if (v + patch >= extent) {
      o.push_back(extent - patch);
      break;
    }
    o.push_back(v);
  }
  return o;
}

Tensor crop(const Tensor& image, int y0, int x0, int h, int w) {
  Tensor out({image.channels(), h, w});
  for (int c = 0; c < image.channels(); ++c)
    for (int y = 0; y < h; ++y) {
      const float* src = image.plane(c) + static_cast<std::size_t>(y0 + y) * image.width() + x0;
      std::copy(src, src + w, out.plane(c) + static_cast<std::size_t>(y) * w);
    }
  return out;
}

}  // namespace

PatchGrid make_grid(int height, int width, int patch, int stride) {
  if (patch <= 0 || stride <= 0) throw ConfigError("patch size and stride must be positive");
  if (stride > patch) throw ConfigError("patch stride must not exceed the patch size");
  if (height < patch || width < patch) {
    throw ConfigError("image " + std::to_string(height) + "x" + std::to_string(width) + " is smaller than the " +
                      std::to_string(patch) + "x" + std::to_string(patch) + " patch");
  }
  PatchGrid g{patch, stride, height, width, {}};
  for (int y : axis_origins(height, patch, stride))
    for (int x : axis_origins(width, patch, stride)) g.origins.push_back({y, x});
  return g;
}

SplitResult split(const Tensor& image, int patch, int stride) {
  if (image.rank() != 3) throw ConfigError("split expects a CxHxW image");
  SplitResult r{make_grid(image.height(), image.width(), patch, stride), {}};
  for (const PatchOrigin& o : r.grid.origins) r.patches.push_back(crop(image, o.y, o.x, patch, patch));
  return r;
}

Tensor interp_upscale(const Tensor& patch, int scale) { return bicubic_upscale(patch, scale); }

Tensor run_branch(const ParameterStore& store, int branch, const Tensor& lr_patch) {
  const SupernetConfig& cfg = store.config();
  if (branch < 0 || branch > cfg.num_subnets()) throw ConfigError("branch " + std::to_string(branch) + " out of range");
  if (branch == 0) return interp_upscale(lr_patch, cfg.scale);
  Tensor out = supernet_forward(store, cfg.widths[static_cast<std::size_t>(branch - 1)], lr_patch);
  for (float& v : out.values()) v = std::clamp(v, 0.0f, 255.0f);
  return out;
}

MergeAccumulator::MergeAccumulator(const PatchGrid& grid, int channels, int scale)
    : grid_(&grid),
      scale_(scale),
      sum_({channels, grid.height * scale, grid.width * scale}),
      weight_(static_cast<std::size_t>(grid.height) * scale * grid.width * scale, 0.0f) {}

void MergeAccumulator::add(std::size_t patch_index, const Tensor& p) {
  const int sp = grid_->patch * scale_;
  const int ch = sum_.channels(), out_w = sum_.width();
  if (patch_index >= grid_->origins.size()) throw ConfigError("merge: patch index outside the grid");
  if (p.shape() != std::vector<int>{ch, sp, sp}) throw ConfigError("merge: SR patch has wrong shape");
  const int y0 = grid_->origins[patch_index].y * scale_, x0 = grid_->origins[patch_index].x * scale_;
  for (int y = 0; y < sp; ++y)
    for (int x = 0; x < sp; ++x) weight_[static_cast<std::size_t>(y0 + y) * out_w + x0 + x] += 1.0f;
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < sp; ++y) {
      const float* src = p.plane(c) + static_cast<std::size_t>(y) * sp;
      float* dst = sum_.plane(c) + static_cast<std::size_t>(y0 + y) * out_w + x0;
      for (int x = 0; x < sp; ++x) dst[x] += src[x];
    }
}

Tensor MergeAccumulator::finish() const {
  Tensor out = sum_;
  for (int c = 0; c < out.channels(); ++c) {
    float* dst = out.plane(c);
    for (std::size_t i = 0; i < weight_.size(); ++i) {
      if (weight_[i] == 0.0f) throw Error("merge: uncovered output pixel");
      if (weight_[i] != 1.0f) dst[i] /= weight_[i];
    }
  }
  return out;
}

Tensor merge(const PatchGrid& grid, const std::vector<Tensor>& sr_patches, int scale) {
  if (sr_patches.size() != grid.origins.size()) throw ConfigError("merge: patch count does not match the grid");
  if (sr_patches.empty()) throw ConfigError("merge: no patches");
  MergeAccumulator acc(grid, sr_patches.front().channels(), scale);
  for (std::size_t n = 0; n < sr_patches.size(); ++n) acc.add(n, sr_patches[n]);
  return acc.finish();
}

double avg_flops(const SrReport& report, const CostSet& costs, double full_flops) {
  if (report.total_patches <= 0) return 0.0;
  if (report.branch_counts.size() != costs.cost.size()) throw ConfigError("report and cost set disagree on branches");
  double acc = 0.0;
  for (std::size_t j = 0; j < costs.cost.size(); ++j) acc += report.branch_counts[j] * costs.cost[j] * full_flops;
  return acc / report.total_patches;
}

SrResult sr_image_routed(const ParameterStore& store, const CostSet& costs,
                         const PatchGrid& grid, const std::vector<Tensor>& patches,
                         const std::vector<RoutingEntry>& routing) {
  const SupernetConfig& cfg = store.config();
  if (routing.size() != patches.size()) throw ConfigError("routing does not cover every patch");
  if (costs.cost.size() != static_cast<std::size_t>(cfg.num_subnets() + 1)) {
    throw ConfigError("cost set does not match the supernet's branch count");
  }
  std::vector<Tensor> sr(patches.size());
  parallel_for(patches.size(), [&](std::size_t n) { sr[n] = run_branch(store, routing[n].branch, patches[n]); });
  SrResult r;
  r.image = merge(grid, sr, cfg.scale);
  r.routing = routing;
  r.report.branch_counts.assign(costs.cost.size(), 0);
  for (const RoutingEntry& e : routing) ++r.report.branch_counts[static_cast<std::size_t>(e.branch)];
  r.report.total_patches = static_cast<int>(routing.size());
  r.report.avg_flops =
      avg_flops(r.report, costs, static_cast<double>(subnet_flops(cfg, 1.0, grid.patch, grid.patch)));
  return r;
}

SrResult sr_image(const Tensor& image, const ParameterStore& store, const EdgePsnrTables& tables,
                  const CostSet& costs, double eta, EdgeOperator op, const SrOptions& options) {
  if (image.rank() != 3 || image.channels() != store.config().color_channels) {
    throw ConfigError("sr_image expects a 3xHxW image, got " + shape_string(image.shape()));
  }
  if (eta < 0.0) throw ConfigError("eta must be non-negative");
  SplitResult s = split(image, options.patch, options.stride);
  std::vector<RoutingEntry> routing(s.patches.size());
  for (std::size_t n = 0; n < s.patches.size(); ++n) {
    const double e = edge_score(s.patches[n], op);
    routing[n] = {s.grid.origins[n], e, select_branch(e, tables, costs, eta)};
  }
  return sr_image_routed(store, costs, s.grid, s.patches, routing);
}

void write_report(std::ostream& os, const SrReport& report) {
  os << "patches: " << report.total_patches << "\n";
  for (std::size_t j = 0; j < report.branch_counts.size(); ++j) {
    const double frac = report.total_patches ? 100.0 * report.branch_counts[j] / report.total_patches : 0.0;
    os << "  branch " << j << (j == 0 ? " (bicubic)" : "") << ": " << report.branch_counts[j] << " ("
       << std::fixed << std::setprecision(1) << frac << "%)\n";
    os.unsetf(std::ios::floatfield);
  }
  os << "average FLOPs per patch: " << std::fixed << std::setprecision(0) << report.avg_flops << "\n";
  os.unsetf(std::ios::floatfield);
  os << std::setprecision(6);
}

void write_report_csv(std::ostream& os, const SrReport& report) {
  os << "total_patches,avg_flops";
  for (std::size_t j = 0; j < report.branch_counts.size(); ++j) os << ",count_branch" << j;
  os << "\n" << report.total_patches << "," << std::setprecision(17) << report.avg_flops;
  for (int c : report.branch_counts) os << "," << c;
  os << "\n" << std::setprecision(6);
}

void write_routing_csv(std::ostream& os, const std::vector<RoutingEntry>& routing) {
  os << "y,x,edge_score,branch\n" << std::setprecision(17);
  for (const RoutingEntry& e : routing) os << e.origin.y << "," << e.origin.x << "," << e.edge_score << "," << e.branch << "\n";
  os << std::setprecision(6);
}

}  // namespace anysr
