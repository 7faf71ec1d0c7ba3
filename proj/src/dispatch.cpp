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

#include "anysr/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "anysr/error.hpp"
#include "anysr/metrics.hpp"
#include "anysr/parallel.hpp"
#include "anysr/pipeline.hpp"
#include "anysr/resize.hpp"

namespace anysr {
namespace {

constexpr const char* kTablesFormat = "anysr-edge-psnr-tables";
constexpr int kTablesVersion = 1;

void fill_empty_bins(std::vector<double>& row, const std::vector<int>& counts) {
  const int K = static_cast<int>(row.size());
  for (int k = 0; k < K; ++k) {
    if (counts[static_cast<std::size_t>(k)] > 0) continue;
    int lo = k - 1, hi = k + 1;
    while (lo >= 0 && counts[static_cast<std::size_t>(lo)] == 0) --lo;
    while (hi < K && counts[static_cast<std::size_t>(hi)] == 0) ++hi;
    if (lo >= 0 && hi < K) {
      const double t = static_cast<double>(k - lo) / static_cast<double>(hi - lo);
      row[static_cast<std::size_t>(k)] = (1.0 - t) * row[static_cast<std::size_t>(lo)] + t * row[static_cast<std::size_t>(hi)];
    } else if (lo >= 0) {
      row[static_cast<std::size_t>(k)] = row[static_cast<std::size_t>(lo)];
    } else {
      row[static_cast<std::size_t>(k)] = row[static_cast<std::size_t>(hi)];
    }
  }
}

}  // namespace

std::vector<ValidationPatch> validation_patches(std::span<const ImagePair> pairs, int patch, int stride, int scale) {
  std::vector<ValidationPatch> out;
  for (const ImagePair& pair : pairs) {
    if (pair.hr.height() != pair.lr.height() * scale || pair.hr.width() != pair.lr.width() * scale) {
      throw ConfigError("validation pair HR " + shape_string(pair.hr.shape()) + " is not " + std::to_string(scale) +
                        "x LR " + shape_string(pair.lr.shape()));
    }
    if (pair.lr.height() < patch || pair.lr.width() < patch) continue;
    const PatchGrid grid = make_grid(pair.lr.height(), pair.lr.width(), patch, stride);
    for (const PatchOrigin& o : grid.origins) {
      ValidationPatch vp{Tensor({3, patch, patch}), Tensor({3, patch * scale, patch * scale})};
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < patch; ++y)
          for (int x = 0; x < patch; ++x) vp.lr.at(c, y, x) = pair.lr.at(c, o.y + y, o.x + x);
        for (int y = 0; y < patch * scale; ++y)
          for (int x = 0; x < patch * scale; ++x) vp.hr.at(c, y, x) = pair.hr.at(c, o.y * scale + y, o.x * scale + x);
      }
      out.push_back(std::move(vp));
    }
  }
  return out;
}

void EdgePsnrTables::validate() const {
  if (!(e_min < e_max)) throw ConfigError("lookup tables need e_min < e_max");
  if (bins <= 0) throw ConfigError("lookup tables need at least one bin");
  if (psnr.size() < 2) throw ConfigError("lookup tables need the interpolation row and at least one subnet row");
  if (widths.size() + 1 != psnr.size()) throw ConfigError("lookup tables: one row per width plus interpolation expected");
  if (counts.size() != static_cast<std::size_t>(bins)) throw ConfigError("lookup tables: counts length != bins");
  for (const auto& row : psnr) {
    if (row.size() != static_cast<std::size_t>(bins)) throw ConfigError("lookup tables: row length != bins");
    for (double v : row)
      if (!std::isfinite(v)) throw ConfigError("lookup tables contain a non-finite entry");
  }
}

void CostSet::validate() const {
  if (cost.size() < 2) throw ConfigError("cost set needs interpolation plus at least one subnet");
  if (!(cost[0] >= 0.0)) throw ConfigError("interpolation cost must be non-negative");
  for (std::size_t j = 1; j < cost.size(); ++j)
    if (!(cost[j] > cost[j - 1])) throw ConfigError("costs must be strictly increasing by branch");
  if (cost.back() != 1.0) throw ConfigError("full-width cost must be exactly 1");
}

CostSet make_costs(const SupernetConfig& config, int lr_patch) {
  const double full = static_cast<double>(subnet_flops(config, 1.0, lr_patch, lr_patch));
  CostSet c;
  c.cost.push_back(static_cast<double>(bicubic_upscale_flops(config.color_channels, lr_patch, lr_patch, config.scale)) /
                   full);
  for (double a : config.widths) c.cost.push_back(static_cast<double>(subnet_flops(config, a, lr_patch, lr_patch)) / full);
  c.validate();
  return c;
}

std::pair<double, double> bin_bounds(double e_min, double e_max, int bins, int k) {
  if (bins <= 0 || k < 1 || k > bins) throw ConfigError("bin_bounds: k must lie in [1, K]");
  const double range = e_max - e_min;
  const double hi = k == bins ? e_max : e_min + range * k / bins;
  return {e_min + range * (k - 1) / bins, hi};
}

int bin_index(double e, double e_min, double e_max, int bins) {
  if (!(e_max > e_min) || bins <= 0) throw ConfigError("bin_index: need e_min < e_max and K > 0");
  const double raw = std::floor((e - e_min) * bins / (e_max - e_min) + 1.0);
  if (!(raw >= 1.0)) return 1;  // also catches NaN
  if (raw >= bins) return bins;
  return static_cast<int>(raw);
}

int bin_index(double e, const EdgePsnrTables& tables) { return bin_index(e, tables.e_min, tables.e_max, tables.bins); }

EdgePsnrTables tables_from_measurements(std::span<const double> scores,
                                        const std::vector<std::vector<double>>& psnr, int bins) {
  if (scores.empty()) throw ConfigError("lookup tables need at least one validation patch");
  if (bins <= 0) throw ConfigError("lookup tables need at least one bin");
  for (const auto& row : psnr)
    if (row.size() != scores.size()) throw ConfigError("lookup tables: PSNR rows must match the score count");
  EdgePsnrTables t;
  t.bins = bins;
  t.e_min = *std::min_element(scores.begin(), scores.end());
  t.e_max = *std::max_element(scores.begin(), scores.end());
  if (!(t.e_min < t.e_max)) throw ConfigError("lookup tables: all validation edge scores are equal");

  std::vector<int> bin_of(scores.size());
  t.counts.assign(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    bin_of[i] = bin_index(scores[i], t.e_min, t.e_max, bins) - 1;
    ++t.counts[static_cast<std::size_t>(bin_of[i])];
  }
  for (const auto& row_in : psnr) {
    std::vector<double> row(static_cast<std::size_t>(bins), 0.0);
    for (std::size_t i = 0; i < scores.size(); ++i) row[static_cast<std::size_t>(bin_of[i])] += row_in[i];
    for (std::size_t k = 0; k < row.size(); ++k)
      if (t.counts[k] > 0) row[k] /= t.counts[k];
    fill_empty_bins(row, t.counts);
    t.psnr.push_back(std::move(row));
  }
  return t;
}

EdgePsnrTables build_tables(const ParameterStore& store, std::span<const ValidationPatch> patches, EdgeOperator op,
                            int bins) {
  if (patches.empty()) throw ConfigError("build_tables: empty validation set");
  const SupernetConfig& cfg = store.config();
  const int branches = cfg.num_subnets() + 1;
  std::vector<double> scores(patches.size());
  std::vector<std::vector<double>> psnr(static_cast<std::size_t>(branches), std::vector<double>(patches.size()));
  parallel_for(patches.size(), [&](std::size_t i) {
    const ValidationPatch& p = patches[i];
    if (p.hr.height() != p.lr.height() * cfg.scale || p.hr.width() != p.lr.width() * cfg.scale) {
      throw ConfigError("validation patch HR extent is not scale x LR extent");
    }
    scores[i] = edge_score(p.lr, op);
    for (int j = 0; j < branches; ++j) {
      psnr[static_cast<std::size_t>(j)][i] = anysr::psnr(run_branch(store, j, p.lr), p.hr);
    }
  });
  EdgePsnrTables t = tables_from_measurements(scores, psnr, bins);
  t.edge_op = op;
  t.lr_patch = patches.front().lr.width();
  t.widths = cfg.widths;
  t.checkpoint = store_fingerprint(store);
  t.validate();
  return t;
}

int select_branch(double e, const EdgePsnrTables& tables, const CostSet& costs, double eta) {
  if (costs.cost.size() != tables.psnr.size()) throw ConfigError("cost set and lookup tables disagree on branch count");
  const std::size_t k = static_cast<std::size_t>(bin_index(e, tables) - 1);
  int best = 0;
  double best_value = eta * tables.psnr[0][k] - costs.cost[0];
  for (std::size_t j = 1; j < tables.psnr.size(); ++j) {
    const double v = eta * tables.psnr[j][k] - costs.cost[j];
    if (v > best_value) {
      best_value = v;
      best = static_cast<int>(j);
    }
  }
  return best;
}

std::vector<double> quantile_thresholds(std::span<const double> scores, int branches) {
  if (scores.empty()) throw ConfigError("quantile_thresholds: no scores");
  if (branches < 1) throw ConfigError("quantile_thresholds: need at least one branch");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> t;
  for (int q = 1; q < branches; ++q) {
    t.push_back(sorted[static_cast<std::size_t>(q) * sorted.size() / static_cast<std::size_t>(branches)]);
  }
  return t;
}

int select_by_threshold(double e, std::span<const double> thresholds) {
  return static_cast<int>(std::upper_bound(thresholds.begin(), thresholds.end(), e) - thresholds.begin());
}

void save_tables(const std::filesystem::path& path, const EdgePsnrTables& tables, const CostSet& costs) {
  tables.validate();
  costs.validate();
  if (costs.cost.size() != tables.psnr.size()) throw ConfigError("cost set and lookup tables disagree on branch count");
  nlohmann::json j;
  j["format"] = kTablesFormat;
  j["version"] = kTablesVersion;
  j["edge_op"] = std::string(edge_operator_name(tables.edge_op));
  j["bins"] = tables.bins;
  j["lr_patch"] = tables.lr_patch;
  j["e_min"] = tables.e_min;
  j["e_max"] = tables.e_max;
  j["widths"] = tables.widths;
  j["costs"] = costs.cost;
  j["checkpoint"] = tables.checkpoint;
  j["counts"] = tables.counts;
  j["psnr"] = tables.psnr;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open tables file for writing: " + path.string());
  out << j.dump(1) << "\n";
  if (!out) throw IoError("failed writing tables file: " + path.string());
}

TablesFile load_tables(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tables file: " + path.string());
  TablesFile f;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != kTablesFormat) throw FormatError("not a lookup-table file: " + path.string());
    if (j.at("version").get<int>() != kTablesVersion) throw FormatError("unsupported lookup-table version");
    f.tables.edge_op = parse_edge_operator(j.at("edge_op").get<std::string>());
    f.tables.bins = j.at("bins").get<int>();
    f.tables.lr_patch = j.at("lr_patch").get<int>();
    f.tables.e_min = j.at("e_min").get<double>();
    f.tables.e_max = j.at("e_max").get<double>();
    f.tables.widths = j.at("widths").get<std::vector<double>>();
    f.costs.cost = j.at("costs").get<std::vector<double>>();
    f.tables.checkpoint = j.at("checkpoint").get<std::string>();
    f.tables.counts = j.at("counts").get<std::vector<int>>();
    f.tables.psnr = j.at("psnr").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed lookup-table file " + path.string() + ": " + e.what());
  }
  try {
    f.tables.validate();
    f.costs.validate();
  } catch (const ConfigError& e) {
    throw FormatError("invalid lookup-table file " + path.string() + ": " + e.what());
  }
  if (f.costs.cost.size() != f.tables.psnr.size()) throw FormatError("lookup-table file: costs/rows mismatch");
  return f;
}

bool check_pairing(const EdgePsnrTables& tables, const ParameterStore& store, std::ostream& warn) {
  const auto& w = store.config().widths;
  bool same_widths = w.size() == tables.widths.size();
  for (std::size_t j = 0; same_widths && j < w.size(); ++j) same_widths = std::fabs(w[j] - tables.widths[j]) < 1e-9;
  if (!same_widths) throw ConfigError("lookup tables were built for a different width list");
  if (tables.checkpoint != store_fingerprint(store)) {
    warn << "warning: lookup tables were built for checkpoint " << tables.checkpoint << ", loaded weights are "
         << store_fingerprint(store) << "\n";
    return false;
  }
  return true;
}

}  // namespace anysr
