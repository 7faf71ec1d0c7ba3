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

#include "anysr/cli.hpp"

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "anysr/dispatch.hpp"
#include "anysr/error.hpp"
#include "anysr/io.hpp"
#include "anysr/metrics.hpp"
#include "anysr/parallel.hpp"
#include "anysr/pipeline.hpp"
#include "anysr/resize.hpp"
#include "anysr/supernet.hpp"
#include "anysr/trainer.hpp"

namespace anysr {
namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::uint64_t seed = 1;
  int threads = 0;
};

struct TrainOptions {
  std::string data;
  std::string out;
  std::string log;
  std::vector<double> widths{0.29, 0.46, 1.0};
  double sampling_exp = 2.0;
  int patch = 32;
  int stride = 128;
  int epochs = 20;
  int batch = 16;
  float lr = 1e-3f;
  std::vector<int> lr_decay_epochs{10, 15};
  float lr_decay = 0.5f;
  float upsample_lr_scale = 0.1f;
  float grad_clip = 0.0f;
  bool no_augment = false;
  bool no_global_skip = false;
  int checkpoint_every = 0;
};

struct TablesOptions {
  std::string checkpoint;
  std::string val;
  std::string out;
  std::vector<double> widths;
  int bins = 30;
  std::string edge_op = "laplacian";
  int patch = 32;
  int stride = 0;
};

struct InferOptions {
  std::string checkpoint;
  std::string tables;
  std::string input;
  std::string out;
  double eta = 0.0;
  std::string edge_op;
  int patch = 0;
  int stride = 0;
  std::string routing_csv;
  std::string report_csv;
};

struct EvalOptionsCli {
  std::string checkpoint;
  std::string tables;
  std::string val;
  std::string out;
  std::vector<double> etas;
  std::string edge_op;
  int patch = 0;
  int stride = 0;
  bool y_channel = false;
};

struct FlopsOptions {
  std::vector<double> widths{0.29, 0.46, 1.0};
  std::optional<double> width;
  int patch = 32;
  int scale = 4;
};

std::vector<Tensor> load_images(const std::string& dir, std::ostream& err) {
  const std::vector<fs::path> files = scan_dataset(dir, {}, &err);
  if (files.empty()) throw ConfigError("no .png/.ppm images in " + dir);
  std::vector<Tensor> images;
  images.reserve(files.size());
  for (const fs::path& f : files) images.push_back(read_image(f));
  return images;
}

std::vector<ImagePair> load_pairs(const std::string& dir, int scale, std::ostream& err) {
  std::vector<ImagePair> pairs;
  for (const Tensor& hr : load_images(dir, err)) pairs.push_back(make_image_pair(hr, scale));
  return pairs;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << text;
  if (!f) throw IoError("write to " + path + " failed");
}

void cmd_train(const GlobalOptions& g, const TrainOptions& o, std::ostream& out, std::ostream& err) {
  SupernetConfig cfg;
  cfg.widths = o.widths;
  cfg.global_skip = !o.no_global_skip;
  cfg.validate();
  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch = o.batch;
  tc.adam.lr = o.lr;
  tc.lr_decay_epochs = o.lr_decay_epochs;
  tc.lr_decay = o.lr_decay;
  tc.upsample_lr_scale = o.upsample_lr_scale;
  tc.grad_clip = o.grad_clip;
  tc.augment = !o.no_augment;
  tc.seed = g.seed;
  tc.validate();
  SamplerConfig sc;
  sc.exponent = o.sampling_exp;

  const std::vector<Tensor> images = load_images(o.data, err);
  const PatchDataset dataset = prepare_patches(images, o.patch, cfg.scale, o.stride, &err);
  if (dataset.empty()) throw ConfigError("no training patches: every image in " + o.data + " is smaller than " +
                                         std::to_string(o.patch * cfg.scale) + " pixels");
  out << "images: " << images.size() << ", patches: " << dataset.size() << ", widths: " << join(cfg.widths) << "\n";

  const std::string log_path = o.log.empty() ? o.out + ".log" : o.log;
  std::ofstream log(log_path);
  if (!log) throw IoError("cannot open " + log_path + " for writing");
  log << "iteration,epoch,branch,loss\n";

  ParameterStore store = build_supernet(cfg, g.seed);
  std::size_t logged = 0;
  auto on_epoch = [&](int epoch, const TrainLog& tl) {
    double sum = 0.0;
    const std::size_t first = logged;
    for (; logged < tl.loss.size(); ++logged) {
      log << logged << "," << epoch << "," << tl.branch[logged] << "," << std::setprecision(9) << tl.loss[logged]
          << "\n";
      sum += tl.loss[logged];
    }
    log.flush();
    const std::size_t n = logged - first;
    out << "epoch " << epoch + 1 << "/" << o.epochs << "  mean loss " << std::setprecision(6)
        << (n ? sum / static_cast<double>(n) : 0.0) << "\n";
    if (o.checkpoint_every > 0 && (epoch + 1) % o.checkpoint_every == 0 && epoch + 1 < o.epochs) {
      save_checkpoint(o.out + ".epoch" + std::to_string(epoch + 1), store);
    }
  };
  train(store, dataset, tc, sc, on_epoch);
  save_checkpoint(o.out, store);
  out << "checkpoint: " << o.out << " (" << store_fingerprint(store) << ")\nloss log: " << log_path << "\n";
}

void cmd_build_tables(const GlobalOptions&, const TablesOptions& o, std::ostream& out, std::ostream& err) {
  const ParameterStore store = load_checkpoint(o.checkpoint);
  const SupernetConfig& cfg = store.config();
  if (!o.widths.empty() && o.widths != cfg.widths) {
    throw ConfigError("--widths " + join(o.widths) + " do not match the checkpoint's widths " + join(cfg.widths));
  }
  const EdgeOperator op = parse_edge_operator(o.edge_op);
  const int stride = o.stride > 0 ? o.stride : o.patch;
  const std::vector<ImagePair> pairs = load_pairs(o.val, cfg.scale, err);
  const std::vector<ValidationPatch> patches = validation_patches(pairs, o.patch, stride, cfg.scale);
  if (patches.empty()) throw ConfigError("no validation image in " + o.val + " holds a " + std::to_string(o.patch) +
                                         "-pixel LR patch");
  const EdgePsnrTables tables = build_tables(store, patches, op, o.bins);
  const CostSet costs = make_costs(cfg, o.patch);
  save_tables(o.out, tables, costs);

  int occupied = 0;
  for (int c : tables.counts) occupied += c > 0;
  out << "validation patches: " << patches.size() << "\n"
      << "edge operator: " << edge_operator_name(op) << ", score range [" << tables.e_min << ", " << tables.e_max
      << "]\n"
      << "bins occupied: " << occupied << "/" << tables.bins << "\n"
      << "bin counts: " << join(tables.counts) << "\n"
      << "table entries: " << tables.num_branches() * tables.bins << " (" << tables.num_branches() - 1 << "x"
      << tables.bins << " subnet + " << tables.bins << " bicubic)\n"
      << "tables: " << o.out << "\n";
}

struct LoadedModel {
  ParameterStore store;
  TablesFile tables;
  EdgeOperator op;
  int patch;
  int stride;
};

LoadedModel load_model(const std::string& checkpoint, const std::string& tables_path, const std::string& edge_op,
                       int patch, int stride, std::ostream& err) {
  LoadedModel m{load_checkpoint(checkpoint), load_tables(tables_path), EdgeOperator::kLaplacian, 0, 0};
  check_pairing(m.tables.tables, m.store, err);
  m.op = m.tables.tables.edge_op;
  if (!edge_op.empty() && parse_edge_operator(edge_op) != m.op) {
    throw ConfigError("--edge-op " + edge_op + " differs from the tables' operator " +
                      std::string(edge_operator_name(m.op)));
  }
  m.patch = patch > 0 ? patch : m.tables.tables.lr_patch;
  m.stride = stride > 0 ? stride : m.patch;
  return m;
}

void cmd_infer(const GlobalOptions&, const InferOptions& o, std::ostream& out, std::ostream& err) {
  const LoadedModel m = load_model(o.checkpoint, o.tables, o.edge_op, o.patch, o.stride, err);
  const Tensor lr = read_image(o.input);
  const SrResult r = sr_image(lr, m.store, m.tables.tables, m.tables.costs, o.eta, m.op, SrOptions{m.patch, m.stride});
  write_image(o.out, r.image);
  out << "input " << lr.width() << "x" << lr.height() << " -> " << r.image.width() << "x" << r.image.height()
      << ", eta " << o.eta << "\n";
  write_report(out, r.report);
  if (!o.routing_csv.empty()) {
    std::ostringstream os;
    write_routing_csv(os, r.routing);
    write_file(o.routing_csv, os.str());
  }
  if (!o.report_csv.empty()) {
    std::ostringstream os;
    write_report_csv(os, r.report);
    write_file(o.report_csv, os.str());
  }
}

void cmd_eval(const GlobalOptions&, const EvalOptionsCli& o, std::ostream& out, std::ostream& err) {
  const LoadedModel m = load_model(o.checkpoint, o.tables, o.edge_op, o.patch, o.stride, err);
  const std::vector<ImagePair> pairs = load_pairs(o.val, m.store.config().scale, err);
  EvalOptions eo;
  eo.patch = m.patch;
  eo.stride = m.stride;
  eo.y_channel = o.y_channel;
  const std::vector<EvalRow> rows = evaluate(pairs, m.store, m.tables.tables, m.tables.costs, o.etas, m.op, eo);
  std::ostringstream csv;
  write_eval_csv(csv, rows);
  if (o.out.empty()) {
    out << csv.str();
  } else {
    write_file(o.out, csv.str());
    out << rows.size() << " rows written to " << o.out << "\n";
  }
}

void cmd_flops(const GlobalOptions&, const FlopsOptions& o, std::ostream& out, std::ostream&) {
  SupernetConfig cfg;
  cfg.widths = o.widths;
  cfg.scale = o.scale;
  cfg.validate();
  if (o.patch <= 0) throw ConfigError("--patch must be positive");
  std::vector<double> shown = cfg.widths;
  if (o.width) {
    cfg.width_index(*o.width);  // throws for an unconfigured width
    shown = {*o.width};
  }
  const double full = static_cast<double>(subnet_flops(cfg, 1.0, o.patch, o.patch));
  out << "LR patch " << o.patch << "x" << o.patch << ", x" << o.scale << "\n";
  out << std::left << std::setw(10) << "width" << std::setw(14) << "flops" << std::setw(10) << "millions"
      << "percent\n";
  auto row = [&](const std::string& name, double flops) {
    std::ostringstream m, pct;
    m << std::fixed << std::setprecision(1) << flops / 1e6;
    pct << std::fixed << std::setprecision(2) << 100.0 * flops / full;
    out << std::left << std::setw(10) << name << std::setw(14) << static_cast<std::uint64_t>(flops) << std::setw(10)
        << m.str() << pct.str() << "\n";
  };
  if (!o.width) row("bicubic", static_cast<double>(bicubic_upscale_flops(cfg.color_channels, o.patch, o.patch, o.scale)));
  for (double a : shown) {
    std::ostringstream name;
    name << a;
    row(name.str(), static_cast<double>(subnet_flops(cfg, a, o.patch, o.patch)));
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Any-time super-resolution with a width-sliceable FSRCNN supernet", "anysr"};
  app.require_subcommand(1);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "INI/TOML file of option values (flags take precedence)");

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for initialisation, shuffling and augmentation")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker thread cap (0 = hardware concurrency)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  TrainOptions t;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the supernet on a directory of HR images");
  train_cmd->add_option("--data", t.data, "Directory of HR training images")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", t.out, "Checkpoint path to write")->required();
  train_cmd->add_option("--log", t.log, "Loss log path (default <out>.log)");
  train_cmd->add_option("--widths", t.widths, "Width multipliers, ascending, last 1.0")->delimiter(',')->capture_default_str();
  train_cmd->add_option("--sampling-exp", t.sampling_exp, "Exponent n of the FLOPs^n subnet sampling")->capture_default_str();
  train_cmd->add_option("--patch", t.patch, "LR training patch size")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--stride", t.stride, "HR-space patch extraction stride")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--epochs", t.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--batch", t.batch)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--lr", t.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--lr-decay-epochs", t.lr_decay_epochs, "Epochs at which the lr is multiplied by --lr-decay")
      ->delimiter(',')
      ->capture_default_str();
  train_cmd->add_option("--lr-decay", t.lr_decay)->capture_default_str();
  train_cmd->add_option("--upsample-lr-scale", t.upsample_lr_scale, "lr multiplier of the deconvolution layer")
      ->capture_default_str();
  train_cmd->add_option("--grad-clip", t.grad_clip, "Global gradient norm clip (0 disables)")->capture_default_str();
  train_cmd->add_flag("--no-augment", t.no_augment, "Disable flips and rotations");
  train_cmd->add_flag("--no-global-skip", t.no_global_skip, "Plain FSRCNN output without the bicubic skip");
  train_cmd->add_option("--checkpoint-every", t.checkpoint_every, "Also write <out>.epochN every N epochs")
      ->check(CLI::NonNegativeNumber);

  TablesOptions b;
  CLI::App* tables_cmd = app.add_subcommand("build-tables", "Measure Edge-to-PSNR lookup tables on validation images");
  tables_cmd->add_option("--checkpoint", b.checkpoint)->required()->check(CLI::ExistingFile);
  tables_cmd->add_option("--val", b.val, "Directory of HR validation images")->required()->check(CLI::ExistingDirectory);
  tables_cmd->add_option("--out", b.out, "Tables file to write (JSON)")->required();
  tables_cmd->add_option("--widths", b.widths, "Expected width multipliers (checked against the checkpoint)")
      ->delimiter(',');
  tables_cmd->add_option("--bins", b.bins, "Edge-score bins K")->check(CLI::PositiveNumber)->capture_default_str();
  tables_cmd->add_option("--edge-op", b.edge_op, "laplacian, sobel or prewitt")->capture_default_str();
  tables_cmd->add_option("--patch", b.patch, "LR patch size")->check(CLI::PositiveNumber)->capture_default_str();
  tables_cmd->add_option("--stride", b.stride, "LR patch stride (default: patch)")->check(CLI::NonNegativeNumber);

  InferOptions i;
  CLI::App* infer_cmd = app.add_subcommand("infer", "Super-resolve one LR image");
  infer_cmd->add_option("--checkpoint", i.checkpoint)->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--tables", i.tables)->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--input", i.input, "LR image (.png or .ppm)")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--out", i.out, "SR image to write")->required();
  infer_cmd->add_option("--eta", i.eta, "Computation-performance tradeoff weight (>= 0)")
      ->required()
      ->check(CLI::NonNegativeNumber);
  infer_cmd->add_option("--edge-op", i.edge_op, "Must match the tables if given");
  infer_cmd->add_option("--patch", i.patch, "LR patch size (default: the tables')")->check(CLI::NonNegativeNumber);
  infer_cmd->add_option("--stride", i.stride, "LR patch stride (default: patch)")->check(CLI::NonNegativeNumber);
  infer_cmd->add_option("--routing-csv", i.routing_csv, "Write per-patch origin, edge score and branch");
  infer_cmd->add_option("--report-csv", i.report_csv, "Write branch counts and average FLOPs");

  EvalOptionsCli e;
  CLI::App* eval_cmd = app.add_subcommand("eval", "PSNR/FLOPs sweep over eta on HR validation images");
  eval_cmd->add_option("--checkpoint", e.checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--tables", e.tables)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--val", e.val, "Directory of HR validation images")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--etas", e.etas, "Comma-separated eta values")
      ->required()
      ->delimiter(',')
      ->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--out", e.out, "CSV path (default: stdout)");
  eval_cmd->add_option("--edge-op", e.edge_op, "Must match the tables if given");
  eval_cmd->add_option("--patch", e.patch, "LR patch size (default: the tables')")->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--stride", e.stride, "LR patch stride (default: patch)")->check(CLI::NonNegativeNumber);
  eval_cmd->add_flag("--y-channel", e.y_channel, "PSNR on BT.601 luma instead of RGB");

  FlopsOptions f;
  CLI::App* flops_cmd = app.add_subcommand("flops", "Print FLOPs per configured width");
  flops_cmd->add_option("--widths", f.widths, "Width multipliers, ascending, last 1.0")->delimiter(',')->capture_default_str();
  flops_cmd->add_option("--width", f.width, "Report only this configured width");
  flops_cmd->add_option("--patch", f.patch, "LR patch extent")->capture_default_str();
  flops_cmd->add_option("--scale", f.scale, "Upscaling factor")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (g.threads > 0) set_max_threads(g.threads);
    if (train_cmd->parsed()) cmd_train(g, t, out, err);
    else if (tables_cmd->parsed()) cmd_build_tables(g, b, out, err);
    else if (infer_cmd->parsed()) cmd_infer(g, i, out, err);
    else if (eval_cmd->parsed()) cmd_eval(g, e, out, err);
    else if (flops_cmd->parsed()) cmd_flops(g, f, out, err);
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace anysr
