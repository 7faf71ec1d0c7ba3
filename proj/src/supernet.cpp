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

#include "anysr/supernet.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "anysr/error.hpp"
#include "anysr/resize.hpp"

namespace anysr {
namespace {

constexpr int kUpsampleKernel = 9;
constexpr char kCheckpointMagic[8] = {'A', 'N', 'Y', 'S', 'R', 'C', 'K', 'P'};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& what, const std::string& v) {
  double out = 0.0;
  const std::string t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(what + ": not a number: '" + v + "'");
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Padding / output padding of the k=9 upsampler so that out = scale * in.
std::pair<int, int> upsample_padding(int scale) {
  const int excess = kUpsampleKernel - scale;  // uncropped minus kept, per side pair
  const int pad = (excess + 1) / 2;
  return {pad, 2 * pad - excess};
}

// Little-endian byte sink/source for the checkpoint format.
class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) bytes_.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  ByteReader(const char* data, std::size_t size) : data_(data), size_(size) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == size_; }

 private:
  void need(std::size_t n) const {
    if (size_ - pos_ < n) throw FormatError("checkpoint truncated");
  }
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::string serialize_payload(const ParameterStore& store) {
  ByteWriter w;
  const std::string cfg = store.config().to_text();
  w.u32(static_cast<std::uint32_t>(cfg.size()));
  w.raw(cfg);
  w.u32(static_cast<std::uint32_t>(store.layers().size()));
  for (const LayerWeights& l : store.layers()) {
    for (int d : l.kernel.shape()) w.u32(static_cast<std::uint32_t>(d));
    w.u32(static_cast<std::uint32_t>(l.prelu_slope.size()));
    for (float v : l.kernel.values()) w.f32(v);
    for (float v : l.bias) w.f32(v);
    for (float v : l.prelu_slope) w.f32(v);
  }
  return w.bytes();
}

std::uint32_t crc_of(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

void check_alpha(const SupernetConfig& config, double alpha) {
  if (alpha == 1.0) return;
  (void)config.width_index(alpha);
}

}  // namespace

void SupernetConfig::validate() const {
  if (base_width <= 0 || shrink_width <= 0 || color_channels <= 0) {
    throw ConfigError("supernet channel counts must be positive");
  }
  if (mapping_depth < 0) throw ConfigError("mapping_depth must be non-negative");
  if (scale < 2 || scale > 8) throw ConfigError("scale must lie in [2, 8]");
  if (widths.empty()) throw ConfigError("at least one width multiplier is required");
  for (std::size_t j = 0; j < widths.size(); ++j) {
    if (!(widths[j] > 0.0 && widths[j] <= 1.0)) {
      throw ConfigError("width multiplier " + format_double(widths[j]) + " outside (0, 1]");
    }
    if (j > 0 && !(widths[j] > widths[j - 1])) throw ConfigError("width multipliers must be strictly increasing");
  }
  if (widths.back() != 1.0) throw ConfigError("the last width multiplier must be exactly 1.0");
}

int SupernetConfig::width_index(double alpha) const {
  for (std::size_t j = 0; j < widths.size(); ++j) {
    if (std::fabs(widths[j] - alpha) < 1e-9) return static_cast<int>(j);
  }
  throw ConfigError("width multiplier " + format_double(alpha) + " is not configured");
}

std::string SupernetConfig::to_text() const {
  std::ostringstream os;
  os << "base_width = " << base_width << "\n"
     << "shrink_width = " << shrink_width << "\n"
     << "mapping_depth = " << mapping_depth << "\n"
     << "scale = " << scale << "\n"
     << "color_channels = " << color_channels << "\n"
     << "global_skip = " << (global_skip ? 1 : 0) << "\n"
     << "widths = ";
  for (std::size_t j = 0; j < widths.size(); ++j) os << (j ? "," : "") << format_double(widths[j]);
  os << "\n";
  return os.str();
}

SupernetConfig SupernetConfig::parse(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line without '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) throw ConfigError("duplicate config key '" + key + "'");
  }
  SupernetConfig c;
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("config key '" + key + "' missing");
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  c.base_width = parse_int("base_width", take("base_width"));
  c.shrink_width = parse_int("shrink_width", take("shrink_width"));
  c.mapping_depth = parse_int("mapping_depth", take("mapping_depth"));
  c.scale = parse_int("scale", take("scale"));
  c.color_channels = parse_int("color_channels", take("color_channels"));
  const int skip = parse_int("global_skip", take("global_skip"));
  if (skip != 0 && skip != 1) throw ConfigError("config key 'global_skip' must be 0 or 1");
  c.global_skip = skip == 1;
  c.widths.clear();
  std::istringstream ws(take("widths"));
  std::string item;
  while (std::getline(ws, item, ',')) c.widths.push_back(parse_double("config key 'widths'", item));
  if (!kv.empty()) throw ConfigError("unknown config key '" + kv.begin()->first + "'");
  c.validate();
  return c;
}

int sliced_channels(double alpha, int channels) {
  return std::max(1, static_cast<int>(std::lround(alpha * channels)));
}

std::vector<ConvSpec> layer_specs(const SupernetConfig& config, double alpha) {
  config.validate();
  const int D = sliced_channels(alpha, config.base_width);
  const int d = sliced_channels(alpha, config.shrink_width);
  const int rgb = config.color_channels;
  std::vector<ConvSpec> specs;
  specs.push_back({rgb, D, 5, 5, 1, 2, 0, false});
  specs.push_back({D, d, 1, 1, 1, 0, 0, false});
  for (int m = 0; m < config.mapping_depth; ++m) specs.push_back({d, d, 3, 3, 1, 1, 0, false});
  specs.push_back({d, D, 1, 1, 1, 0, 0, false});
  const auto [pad, out_pad] = upsample_padding(config.scale);
  specs.push_back({D, rgb, kUpsampleKernel, kUpsampleKernel, config.scale, pad, out_pad, true});
  return specs;
}

ParameterStore::ParameterStore(SupernetConfig config, std::vector<LayerWeights> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {
  const auto specs = layer_specs(config_, 1.0);
  if (specs.size() != layers_.size()) throw ConfigError("parameter store layer count does not match config");
  for (std::size_t l = 0; l < specs.size(); ++l) {
    layers_[l].validate(specs[l]);
    const bool last = l + 1 == specs.size();
    if (layers_[l].has_activation() == last) {
      throw ConfigError("layer " + std::to_string(l) + ": PReLU slope presence does not match the architecture");
    }
  }
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const LayerWeights& l : layers_) n += l.parameter_count();
  return n;
}

ParameterStore build_supernet(const SupernetConfig& config, std::uint64_t seed) {
  const auto specs = layer_specs(config, 1.0);
  std::mt19937_64 rng(seed);
  std::vector<LayerWeights> layers;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const ConvSpec& s = specs[l];
    const bool last = l + 1 == specs.size();
    LayerWeights w;
    w.kernel = Tensor({s.out_channels, s.in_channels, s.kernel_h, s.kernel_w});
    w.bias.assign(static_cast<std::size_t>(s.out_channels), 0.0f);
    if (!last) w.prelu_slope.assign(static_cast<std::size_t>(s.out_channels), 0.25f);
    if (last) {
      // FSRCNN's own upsampler init: N(0, 0.001^2).
      std::normal_distribution<float> dist(0.0f, 0.001f);
      for (float& v : w.kernel.values()) v = dist(rng);
    } else {
      kaiming_normal(w.kernel, static_cast<double>(s.in_channels) * s.kernel_h * s.kernel_w, std::sqrt(2.0), rng);
    }
    layers.push_back(std::move(w));
  }
  return ParameterStore(config, std::move(layers));
}

SubnetView::SubnetView(const ParameterStore& store, double alpha)
    : store_(&store), alpha_(alpha), specs_(layer_specs(store.config(), alpha)) {
  check_alpha(store.config(), alpha);
}

LayerWeights SubnetView::sliced_layer(int l) const {
  const ConvSpec& s = specs_.at(static_cast<std::size_t>(l));
  const LayerWeights& full = store_->layers()[static_cast<std::size_t>(l)];
  const int full_in = full.in_channels();
  const std::size_t taps = static_cast<std::size_t>(s.kernel_h) * s.kernel_w;
  LayerWeights w;
  w.kernel = Tensor({s.out_channels, s.in_channels, s.kernel_h, s.kernel_w});
  for (int o = 0; o < s.out_channels; ++o) {
    const float* src = full.kernel.data() + static_cast<std::size_t>(o) * full_in * taps;
    std::copy(src, src + s.in_channels * taps, w.kernel.data() + static_cast<std::size_t>(o) * s.in_channels * taps);
  }
  w.bias.assign(full.bias.begin(), full.bias.begin() + s.out_channels);
  if (full.has_activation()) w.prelu_slope.assign(full.prelu_slope.begin(), full.prelu_slope.begin() + s.out_channels);
  return w;
}

Tensor supernet_forward(const ParameterStore& store, double alpha, const Tensor& patch) {
  if (patch.rank() != 3 || patch.channels() != store.config().color_channels) {
    throw ConfigError("supernet input must be " + std::to_string(store.config().color_channels) + "xHxW, got " +
                      shape_string(patch.shape()));
  }
  const SubnetView view(store, alpha);
  // Residual mode feeds the stack a mid-gray centred input.
  const float shift = store.config().global_skip ? 0.5f : 0.0f;
  Tensor x = patch;
  for (float& v : x.values()) v = v * (1.0f / 255.0f) - shift;
  for (std::size_t l = 0; l < view.specs().size(); ++l) {
    const LayerWeights w = view.sliced_layer(static_cast<int>(l));
    x = layer_forward(x, w, view.specs()[l]);
    if (w.has_activation()) x = prelu_forward(x, w.prelu_slope);
  }
  for (float& v : x.values()) v *= 255.0f;
  if (store.config().global_skip) {
    const Tensor base = bicubic_upscale(patch, store.config().scale);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += base[i];
  }
  return x;
}

ForwardTrace forward_trace(const ParameterStore& store, double alpha, const Tensor& normalized_patch) {
  if (normalized_patch.rank() != 3 || normalized_patch.channels() != store.config().color_channels) {
    throw ConfigError("supernet input has wrong shape " + shape_string(normalized_patch.shape()));
  }
  const SubnetView view(store, alpha);
  ForwardTrace t;
  t.alpha = alpha;
  t.specs = view.specs();
  Tensor x = normalized_patch;
  if (store.config().global_skip)
    for (float& v : x.values()) v -= 0.5f;
  for (std::size_t l = 0; l < t.specs.size(); ++l) {
    t.weights.push_back(view.sliced_layer(static_cast<int>(l)));
    const LayerWeights& w = t.weights.back();
    t.layer_inputs.push_back(std::move(x));
    Tensor y = layer_forward(t.layer_inputs.back(), w, t.specs[l]);
    if (w.has_activation()) {
      x = prelu_forward(y, w.prelu_slope);
      t.pre_activation.push_back(std::move(y));
    } else {
      x = std::move(y);
      t.pre_activation.emplace_back();
    }
  }
  if (store.config().global_skip) {
    // Same clamping as supernet_forward, which interpolates in [0,255].
    Tensor raw = normalized_patch;
    for (float& v : raw.values()) v *= 255.0f;
    const Tensor base = bicubic_upscale(raw, store.config().scale);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += base[i] * (1.0f / 255.0f);
  }
  t.output = std::move(x);
  return t;
}

StoreGrads StoreGrads::zeros_like(const ParameterStore& store) {
  StoreGrads g;
  for (const LayerWeights& l : store.layers()) {
    g.kernel.emplace_back(l.kernel.size(), 0.0f);
    g.bias.emplace_back(l.bias.size(), 0.0f);
    g.slope.emplace_back(l.prelu_slope.size(), 0.0f);
  }
  return g;
}

void StoreGrads::add(const StoreGrads& other) {
  auto acc = [](std::vector<std::vector<float>>& a, const std::vector<std::vector<float>>& b) {
    for (std::size_t l = 0; l < a.size(); ++l)
      for (std::size_t n = 0; n < a[l].size(); ++n) a[l][n] += b[l][n];
  };
  acc(kernel, other.kernel);
  acc(bias, other.bias);
  acc(slope, other.slope);
}

void StoreGrads::scale(float s) {
  for (auto* group : {&kernel, &bias, &slope})
    for (auto& v : *group)
      for (float& x : v) x *= s;
}

void backward_into(const ParameterStore& store, const ForwardTrace& trace, const Tensor& grad_output,
                   StoreGrads& grads) {
  if (!grad_output.same_shape(trace.output)) throw ConfigError("grad_output does not match traced output");
  Tensor g = grad_output;
  for (int l = static_cast<int>(trace.specs.size()) - 1; l >= 0; --l) {
    const std::size_t li = static_cast<std::size_t>(l);
    const LayerWeights& w = trace.weights[li];
    const ConvSpec& s = trace.specs[li];
    if (w.has_activation()) {
      PreluGrads pg = prelu_backward(trace.pre_activation[li], w.prelu_slope, g);
      for (std::size_t c = 0; c < pg.slope.size(); ++c) grads.slope[li][c] += pg.slope[c];
      g = std::move(pg.input);
    }
    ConvGrads cg = layer_backward(trace.layer_inputs[li], w, s, g);
    const int full_in = store.layers()[li].in_channels();
    const std::size_t taps = static_cast<std::size_t>(s.kernel_h) * s.kernel_w;
    for (int o = 0; o < s.out_channels; ++o) {
      const float* src = cg.kernel.data() + static_cast<std::size_t>(o) * s.in_channels * taps;
      float* dst = grads.kernel[li].data() + static_cast<std::size_t>(o) * full_in * taps;
      for (std::size_t n = 0; n < s.in_channels * taps; ++n) dst[n] += src[n];
      grads.bias[li][static_cast<std::size_t>(o)] += cg.bias[static_cast<std::size_t>(o)];
    }
    g = std::move(cg.input);
  }
}

SliceMask slice_mask(const ParameterStore& store, double alpha) {
  const SubnetView view(store, alpha);
  SliceMask m;
  for (std::size_t l = 0; l < store.layers().size(); ++l) {
    const LayerWeights& full = store.layers()[l];
    const ConvSpec& s = view.specs()[l];
    const std::size_t taps = static_cast<std::size_t>(s.kernel_h) * s.kernel_w;
    std::vector<std::uint8_t> k(full.kernel.size(), 0);
    for (int o = 0; o < s.out_channels; ++o)
      for (int i = 0; i < s.in_channels; ++i)
        std::fill_n(k.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(o) * full.in_channels() + i) * taps),
                    taps, std::uint8_t{1});
    std::vector<std::uint8_t> b(full.bias.size(), 0);
    std::fill_n(b.begin(), s.out_channels, std::uint8_t{1});
    std::vector<std::uint8_t> a(full.prelu_slope.size(), 0);
    if (!a.empty()) std::fill_n(a.begin(), s.out_channels, std::uint8_t{1});
    m.kernel.push_back(std::move(k));
    m.bias.push_back(std::move(b));
    m.slope.push_back(std::move(a));
  }
  return m;
}

std::uint64_t layer_macs(const ConvSpec& spec, int in_h, int in_w) {
  const std::uint64_t out_px =
      static_cast<std::uint64_t>(spec.output_height(in_h)) * static_cast<std::uint64_t>(spec.output_width(in_w));
  return out_px * static_cast<std::uint64_t>(spec.in_channels) * static_cast<std::uint64_t>(spec.out_channels) *
         static_cast<std::uint64_t>(spec.kernel_h) * static_cast<std::uint64_t>(spec.kernel_w);
}

std::uint64_t subnet_flops(const SupernetConfig& config, double alpha, int lr_h, int lr_w) {
  if (lr_h <= 0 || lr_w <= 0) throw ConfigError("flops: LR extent must be positive");
  std::uint64_t macs = 0;
  int h = lr_h, w = lr_w;
  for (const ConvSpec& s : layer_specs(config, alpha)) {
    macs += layer_macs(s, h, w);
    h = s.output_height(h);
    w = s.output_width(w);
  }
  return 2 * macs;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store) {
  const std::string payload = serialize_payload(store);
  ByteWriter trailer;
  trailer.u32(crc_of(payload));
  ByteWriter header;
  header.raw(std::string(kCheckpointMagic, sizeof(kCheckpointMagic)));
  header.u32(kCheckpointVersion);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out << header.bytes() << payload << trailer.bytes();
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

ParameterStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kCheckpointMagic) + 8) throw FormatError("checkpoint truncated: " + path.string());
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw FormatError("not a checkpoint (bad magic): " + path.string());
  }
  ByteReader head(bytes.data() + sizeof(kCheckpointMagic), 4);
  const std::uint32_t version = head.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t payload_off = sizeof(kCheckpointMagic) + 4;
  const std::string payload = bytes.substr(payload_off, bytes.size() - payload_off - 4);
  ByteReader tail(bytes.data() + bytes.size() - 4, 4);
  if (tail.u32() != crc_of(payload)) throw FormatError("checkpoint CRC mismatch (truncated or corrupted): " + path.string());

  ByteReader r(payload.data(), payload.size());
  const SupernetConfig config = SupernetConfig::parse(r.raw(r.u32()));
  const auto specs = layer_specs(config, 1.0);
  const std::uint32_t n_layers = r.u32();
  if (n_layers != specs.size()) throw FormatError("checkpoint layer count does not match its config");
  std::vector<LayerWeights> layers;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    std::vector<int> shape(4);
    for (int& d : shape) d = static_cast<int>(r.u32());
    const std::uint32_t n_slope = r.u32();
    const ConvSpec& s = specs[l];
    if (shape != std::vector<int>{s.out_channels, s.in_channels, s.kernel_h, s.kernel_w}) {
      throw FormatError("checkpoint layer " + std::to_string(l) + " shape " + shape_string(shape) +
                        " does not match its config");
    }
    LayerWeights w;
    w.kernel = Tensor(shape);
    for (float& v : w.kernel.values()) v = r.f32();
    w.bias.resize(static_cast<std::size_t>(shape[0]));
    for (float& v : w.bias) v = r.f32();
    if (n_slope != 0 && n_slope != static_cast<std::uint32_t>(shape[0])) throw FormatError("checkpoint slope length invalid");
    w.prelu_slope.resize(n_slope);
    for (float& v : w.prelu_slope) v = r.f32();
    layers.push_back(std::move(w));
  }
  if (!r.done()) throw FormatError("checkpoint has trailing bytes");
  try {
    return ParameterStore(config, std::move(layers));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint inconsistent: ") + e.what());
  }
}

ParameterStore load_checkpoint(const std::filesystem::path& path, const SupernetConfig& expected) {
  ParameterStore store = load_checkpoint(path);
  if (!(store.config() == expected)) {
    throw ConfigError("checkpoint " + path.string() + " was saved with a different supernet config:\n" +
                      store.config().to_text());
  }
  return store;
}

std::string store_fingerprint(const ParameterStore& store) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", crc_of(serialize_payload(store)));
  return buf;
}

}  // namespace anysr
