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

#include "anysr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>

#include "anysr/error.hpp"
#include "anysr/parallel.hpp"
#include "anysr/pipeline.hpp"

namespace anysr {
namespace {

double capped_psnr(double mse, double peak) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
  if (!a.same_shape(b)) throw ConfigError("psnr: image shapes differ: " + shape_string(a.shape()) + " vs " +
                                          shape_string(b.shape()));
  if (a.empty()) throw ConfigError("psnr: empty images");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sq += d * d;
  }
  return capped_psnr(sq / static_cast<double>(a.size()), peak);
}

double psnr_y(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b) || a.rank() != 3 || a.channels() != 3) throw ConfigError("psnr_y expects two equal RGB images");
  const std::size_t n = static_cast<std::size_t>(a.height()) * a.width();
  double sq = 0.0;
  auto luma = [](const Tensor& t, std::size_t i) {
    return 16.0 + (65.481 * t.plane(0)[i] + 128.553 * t.plane(1)[i] + 24.966 * t.plane(2)[i]) / 255.0;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double d = luma(a, i) - luma(b, i);
    sq += d * d;
  }
  return capped_psnr(sq / static_cast<double>(n), 255.0);
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ConfigError("spearman: inputs differ in length");
  if (xs.size() < 2) throw ConfigError("spearman: need at least two points");
  const std::vector<double> rx = fractional_ranks(xs), ry = fractional_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<EvalRow> evaluate_policies(std::span<const ImagePair> data, const ParameterStore& store,
                                       const CostSet& costs, std::span<const RoutingPolicy> policies,
                                       EdgeOperator op, const EvalOptions& options) {
  const SupernetConfig& cfg = store.config();
  const std::size_t branches = static_cast<std::size_t>(cfg.num_subnets() + 1);
  if (costs.cost.size() != branches) throw ConfigError("cost set does not match the supernet's branch count");
  if (data.empty()) throw ConfigError("evaluate: empty dataset");
  const double full_flops = static_cast<double>(subnet_flops(cfg, 1.0, options.patch, options.patch));

  std::vector<double> psnr_sum(policies.size(), 0.0);
  std::vector<std::vector<long long>> usage(policies.size(), std::vector<long long>(branches, 0));
  long long total_patches = 0;

  for (const ImagePair& pair : data) {
    if (pair.hr.rank() != 3 || pair.lr.rank() != 3 || pair.hr.channels() != pair.lr.channels() ||
        pair.hr.height() != pair.lr.height() * cfg.scale || pair.hr.width() != pair.lr.width() * cfg.scale) {
      throw ConfigError("evaluate: HR " + shape_string(pair.hr.shape()) + " is not " + std::to_string(cfg.scale) +
                        "x LR " + shape_string(pair.lr.shape()));
    }
    const SplitResult s = split(pair.lr, options.patch, options.stride);
    const std::size_t n = s.patches.size();
    std::vector<double> scores(n);
    parallel_for(n, [&](std::size_t i) { scores[i] = edge_score(s.patches[i], op); });

    std::vector<std::vector<int>> route(policies.size(), std::vector<int>(n));
    std::vector<std::vector<std::uint8_t>> needed(n, std::vector<std::uint8_t>(branches, 0));
    for (std::size_t p = 0; p < policies.size(); ++p)
      for (std::size_t i = 0; i < n; ++i) {
        const int b = policies[p](scores[i]);
        if (b < 0 || static_cast<std::size_t>(b) >= branches) throw ConfigError("routing policy returned a bad branch");
        route[p][i] = b;
        needed[i][static_cast<std::size_t>(b)] = 1;
      }

    std::vector<std::vector<std::optional<Tensor>>> sr(n, std::vector<std::optional<Tensor>>(branches));
    parallel_for(n, [&](std::size_t i) {
      for (std::size_t b = 0; b < branches; ++b)
        if (needed[i][b]) sr[i][b] = run_branch(store, static_cast<int>(b), s.patches[i]);
    });

    for (std::size_t p = 0; p < policies.size(); ++p) {
      MergeAccumulator acc(s.grid, pair.lr.channels(), cfg.scale);
      for (std::size_t i = 0; i < n; ++i) {
        acc.add(i, *sr[i][static_cast<std::size_t>(route[p][i])]);
        ++usage[p][static_cast<std::size_t>(route[p][i])];
      }
      const Tensor out = acc.finish();
      psnr_sum[p] += options.y_channel ? psnr_y(out, pair.hr) : psnr(out, pair.hr);
    }
    total_patches += static_cast<long long>(n);
  }

  std::vector<EvalRow> rows;
  for (std::size_t p = 0; p < policies.size(); ++p) {
    EvalRow r;
    r.eta = std::numeric_limits<double>::quiet_NaN();
    r.mean_psnr_db = psnr_sum[p] / static_cast<double>(data.size());
    double flops = 0.0;
    for (std::size_t b = 0; b < branches; ++b) {
      r.usage.push_back(static_cast<double>(usage[p][b]) / static_cast<double>(total_patches));
      flops += static_cast<double>(usage[p][b]) * costs.cost[b] * full_flops;
    }
    r.mean_flops = flops / static_cast<double>(total_patches);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<EvalRow> evaluate(std::span<const ImagePair> data, const ParameterStore& store,
                              const EdgePsnrTables& tables, const CostSet& costs, std::span<const double> etas,
                              EdgeOperator op, const EvalOptions& options) {
  std::vector<RoutingPolicy> policies;
  for (double eta : etas) {
    if (!(eta >= 0.0)) throw ConfigError("eta must be non-negative");
    policies.emplace_back([&tables, &costs, eta](double e) { return select_branch(e, tables, costs, eta); });
  }
  std::vector<EvalRow> rows = evaluate_policies(data, store, costs, policies, op, options);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].eta = etas[i];
  return rows;
}

void write_eval_csv(std::ostream& os, std::span<const EvalRow> rows) {
  const std::size_t branches = rows.empty() ? 0 : rows.front().usage.size();
  os << "eta,mean_psnr_db,mean_flops";
  for (std::size_t j = 0; j < branches; ++j) os << ",frac_branch" << j;
  os << "\n" << std::setprecision(10);
  for (const EvalRow& r : rows) {
    os << r.eta << "," << r.mean_psnr_db << "," << r.mean_flops;
    for (double u : r.usage) os << "," << u;
    os << "\n";
  }
  os << std::setprecision(6);
}

}  // namespace anysr
