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

#include "anysr/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "anysr/error.hpp"

namespace anysr {
namespace {

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
int ceil_div(int a, int b) { return -floor_div(-a, b); }

void check_input(const Tensor& input, const LayerWeights& w, const ConvSpec& spec) {
  spec.validate();
  w.validate(spec);
  if (input.rank() != 3 || input.channels() != spec.in_channels) {
    throw ConfigError("conv input " + shape_string(input.shape()) + " does not have " +
                      std::to_string(spec.in_channels) + " channels");
  }
  if (spec.output_height(input.height()) <= 0 || spec.output_width(input.width()) <= 0) {
    throw ConfigError("conv input " + shape_string(input.shape()) + " too small for kernel");
  }
}

void check_grad(const Tensor& input, const ConvSpec& spec, const Tensor& grad_out) {
  const std::vector<int> expect{spec.out_channels, spec.output_height(input.height()),
                                spec.output_width(input.width())};
  if (grad_out.shape() != expect) {
    throw ConfigError("grad_out " + shape_string(grad_out.shape()) + " != forward output " +
                      shape_string(expect));
  }
}

// Range of output columns [lo, hi) of a direct conv whose input column
// ox*stride - pad + kx lies inside [0, in_w).
struct Span1 {
  int lo;
  int hi;
};

Span1 direct_range(int out_w, int in_w, int stride, int pad, int k) {
  int lo = std::max(0, ceil_div(pad - k, stride));
  int hi = std::min(out_w, floor_div(in_w - 1 + pad - k, stride) + 1);
  return {lo, std::max(lo, hi)};
}

// Range of input columns [lo, hi) of a transposed conv whose output column
// ix*stride + kx - pad lies inside [0, out_w).
Span1 transposed_range(int in_w, int out_w, int stride, int pad, int k) {
  int lo = std::max(0, ceil_div(pad - k, stride));
  int hi = std::min(in_w, floor_div(out_w - 1 + pad - k, stride) + 1);
  return {lo, std::max(lo, hi)};
}

// y[0..n) += a * x[0..n)
inline void axpy(float a, const float* __restrict x, float* __restrict y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

// Eight independent partial sums keep the reduction vectorizable without
// relaxing floating-point semantics.
inline float dot(const float* __restrict x, const float* __restrict y, std::size_t n) {
  float acc[8] = {};
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8)
    for (int j = 0; j < 8; ++j) acc[j] += x[k + j] * y[k + j];
  float tail = 0.0f;
  for (; k < n; ++k) tail += x[k] * y[k];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

// Bounded scratch per tile: rows are processed in bands so the column buffer
// stays near this many floats however large the image is.
constexpr std::size_t kTileFloats = std::size_t{1} << 20;

int band_rows(std::size_t rows_of_cols, int row_width, int total_rows) {
  const std::size_t per_row = std::max<std::size_t>(1, rows_of_cols * static_cast<std::size_t>(row_width));
  return static_cast<int>(std::clamp<std::size_t>(kTileFloats / per_row, 1, static_cast<std::size_t>(total_rows)));
}

// Direct conv, output rows [y0, y1): col[(i*kh+ky)*kw+kx][(oy-y0)*out_w+ox]
// holds the input tap read by output (oy, ox), zero outside the image.
void im2col(const Tensor& in, const ConvSpec& s, int out_w, int y0, int y1, std::vector<float>& col) {
  const int in_h = in.height(), in_w = in.width();
  const std::size_t P = static_cast<std::size_t>(y1 - y0) * out_w;
  col.assign(static_cast<std::size_t>(s.in_channels) * s.kernel_h * s.kernel_w * P, 0.0f);
  float* dst = col.data();
  for (int i = 0; i < s.in_channels; ++i) {
    const float* src = in.plane(i);
    for (int ky = 0; ky < s.kernel_h; ++ky)
      for (int kx = 0; kx < s.kernel_w; ++kx, dst += P) {
        const Span1 cols = direct_range(out_w, in_w, s.stride, s.padding, kx);
        for (int oy = y0; oy < y1; ++oy) {
          const int iy = oy * s.stride - s.padding + ky;
          if (iy < 0 || iy >= in_h) continue;
          const float* in_row = src + static_cast<std::size_t>(iy) * in_w;
          float* row = dst + static_cast<std::size_t>(oy - y0) * out_w;
          for (int ox = cols.lo; ox < cols.hi; ++ox) row[ox] = in_row[ox * s.stride - s.padding + kx];
        }
      }
  }
}

// Adjoint of im2col: scatter-adds the column buffer into `grad`.
void col2im_add(const std::vector<float>& col, const ConvSpec& s, int out_w, int y0, int y1, Tensor& grad) {
  const int in_h = grad.height(), in_w = grad.width();
  const std::size_t P = static_cast<std::size_t>(y1 - y0) * out_w;
  const float* src = col.data();
  for (int i = 0; i < s.in_channels; ++i) {
    float* g = grad.plane(i);
    for (int ky = 0; ky < s.kernel_h; ++ky)
      for (int kx = 0; kx < s.kernel_w; ++kx, src += P) {
        const Span1 cols = direct_range(out_w, in_w, s.stride, s.padding, kx);
        for (int oy = y0; oy < y1; ++oy) {
          const int iy = oy * s.stride - s.padding + ky;
          if (iy < 0 || iy >= in_h) continue;
          float* g_row = g + static_cast<std::size_t>(iy) * in_w;
          const float* row = src + static_cast<std::size_t>(oy - y0) * out_w;
          for (int ox = cols.lo; ox < cols.hi; ++ox) g_row[ox * s.stride - s.padding + kx] += row[ox];
        }
      }
  }
}

}  // namespace

int ConvSpec::output_extent(int in, int k) const {
  if (transposed) return (in - 1) * stride - 2 * padding + k + output_padding;
  return floor_div(in + 2 * padding - k, stride) + 1;
}

void ConvSpec::validate() const {
  if (in_channels <= 0 || out_channels <= 0) throw ConfigError("conv channel counts must be positive");
  if (kernel_h <= 0 || kernel_w <= 0) throw ConfigError("conv kernel extents must be positive");
  if (stride <= 0) throw ConfigError("conv stride must be positive");
  if (padding < 0 || output_padding < 0) throw ConfigError("conv padding must be non-negative");
  if (!transposed && output_padding != 0) throw ConfigError("output_padding is only valid for transposed conv");
  if (transposed && output_padding >= stride) throw ConfigError("output_padding must be smaller than stride");
}

void LayerWeights::validate(const ConvSpec& spec) const {
  const std::vector<int> expect{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w};
  if (kernel.shape() != expect) {
    throw ConfigError("kernel " + shape_string(kernel.shape()) + " != " + shape_string(expect));
  }
  if (bias.size() != static_cast<std::size_t>(spec.out_channels)) {
    throw ConfigError("bias length " + std::to_string(bias.size()) + " != out channels " +
                      std::to_string(spec.out_channels));
  }
  if (!prelu_slope.empty() && prelu_slope.size() != bias.size()) {
    throw ConfigError("prelu slope length does not match out channels");
  }
}

Tensor conv2d_forward(const Tensor& input, const LayerWeights& w, const ConvSpec& spec) {
  if (spec.transposed) throw ConfigError("conv2d_forward called with a transposed spec");
  check_input(input, w, spec);
  const int out_h = spec.output_height(input.height()), out_w = spec.output_width(input.width());
  const std::size_t R = static_cast<std::size_t>(spec.in_channels) * spec.kernel_h * spec.kernel_w;
  Tensor out({spec.out_channels, out_h, out_w});
  for (int o = 0; o < spec.out_channels; ++o)
    std::fill(out.plane(o), out.plane(o) + static_cast<std::size_t>(out_h) * out_w, w.bias[o]);

  std::vector<float> col;
  const int band = band_rows(R, out_w, out_h);
  for (int y0 = 0; y0 < out_h; y0 += band) {
    const int y1 = std::min(out_h, y0 + band);
    const std::size_t P = static_cast<std::size_t>(y1 - y0) * out_w;
    im2col(input, spec, out_w, y0, y1, col);
    for (int o = 0; o < spec.out_channels; ++o) {
      float* dst = out.plane(o) + static_cast<std::size_t>(y0) * out_w;
      const float* wrow = w.kernel.data() + static_cast<std::size_t>(o) * R;
      for (std::size_t r = 0; r < R; ++r) axpy(wrow[r], col.data() + r * P, dst, P);
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& input, const LayerWeights& w, const ConvSpec& spec,
                          const Tensor& grad_out) {
  if (spec.transposed) throw ConfigError("conv2d_backward called with a transposed spec");
  check_input(input, w, spec);
  check_grad(input, spec, grad_out);
  const int out_h = grad_out.height(), out_w = grad_out.width();
  const std::size_t R = static_cast<std::size_t>(spec.in_channels) * spec.kernel_h * spec.kernel_w;

  ConvGrads g{Tensor(input.shape()), Tensor(w.kernel.shape()),
              std::vector<float>(static_cast<std::size_t>(spec.out_channels), 0.0f)};
  for (int o = 0; o < spec.out_channels; ++o) {
    const float* go = grad_out.plane(o);
    double acc = 0.0;
    for (std::size_t n = 0; n < static_cast<std::size_t>(out_h) * out_w; ++n) acc += go[n];
    g.bias[o] = static_cast<float>(acc);
  }

  std::vector<float> col, gcol;
  const int band = band_rows(R, out_w, out_h);
  for (int y0 = 0; y0 < out_h; y0 += band) {
    const int y1 = std::min(out_h, y0 + band);
    const std::size_t P = static_cast<std::size_t>(y1 - y0) * out_w;
    im2col(input, spec, out_w, y0, y1, col);
    gcol.assign(R * P, 0.0f);
    for (int o = 0; o < spec.out_channels; ++o) {
      const float* go = grad_out.plane(o) + static_cast<std::size_t>(y0) * out_w;
      const float* wrow = w.kernel.data() + static_cast<std::size_t>(o) * R;
      float* gw = g.kernel.data() + static_cast<std::size_t>(o) * R;
      for (std::size_t r = 0; r < R; ++r) {
        gw[r] += dot(go, col.data() + r * P, P);
        axpy(wrow[r], go, gcol.data() + r * P, P);
      }
    }
    col2im_add(gcol, spec, out_w, y0, y1, g.input);
  }
  return g;
}

// The transposed conv runs as a GEMM from input pixels to (o, ky, kx)
// columns followed by a strided scatter onto the output grid.
Tensor deconv_forward(const Tensor& input, const LayerWeights& w, const ConvSpec& spec) {
  if (!spec.transposed) throw ConfigError("deconv_forward called with a direct spec");
  check_input(input, w, spec);
  const int in_h = input.height(), in_w = input.width();
  const int out_h = spec.output_height(in_h), out_w = spec.output_width(in_w);
  const int kh = spec.kernel_h, kw = spec.kernel_w, s = spec.stride, p = spec.padding;
  const std::size_t taps = static_cast<std::size_t>(kh) * kw;
  Tensor out({spec.out_channels, out_h, out_w});
  for (int o = 0; o < spec.out_channels; ++o)
    std::fill(out.plane(o), out.plane(o) + static_cast<std::size_t>(out_h) * out_w, w.bias[o]);

  std::vector<float> col;
  const int band = band_rows(static_cast<std::size_t>(spec.out_channels) * taps, in_w, in_h);
  for (int y0 = 0; y0 < in_h; y0 += band) {
    const int y1 = std::min(in_h, y0 + band);
    const std::size_t P = static_cast<std::size_t>(y1 - y0) * in_w;
    col.assign(static_cast<std::size_t>(spec.out_channels) * taps * P, 0.0f);
    for (int o = 0; o < spec.out_channels; ++o)
      for (int i = 0; i < spec.in_channels; ++i) {
        const float* src = input.plane(i) + static_cast<std::size_t>(y0) * in_w;
        const float* wk = w.kernel.data() + (static_cast<std::size_t>(o) * spec.in_channels + i) * taps;
        for (std::size_t t = 0; t < taps; ++t) axpy(wk[t], src, col.data() + (o * taps + t) * P, P);
      }
    for (int o = 0; o < spec.out_channels; ++o) {
      float* dst = out.plane(o);
      for (int ky = 0; ky < kh; ++ky) {
        const Span1 rows = transposed_range(in_h, out_h, s, p, ky);
        for (int kx = 0; kx < kw; ++kx) {
          const Span1 cols = transposed_range(in_w, out_w, s, p, kx);
          const float* c = col.data() + (o * taps + static_cast<std::size_t>(ky) * kw + kx) * P;
          for (int iy = std::max(rows.lo, y0); iy < std::min(rows.hi, y1); ++iy) {
            float* out_row = dst + static_cast<std::size_t>(iy * s + ky - p) * out_w;
            const float* c_row = c + static_cast<std::size_t>(iy - y0) * in_w;
            for (int ix = cols.lo; ix < cols.hi; ++ix) out_row[ix * s + kx - p] += c_row[ix];
          }
        }
      }
    }
  }
  return out;
}

ConvGrads deconv_backward(const Tensor& input, const LayerWeights& w, const ConvSpec& spec,
                          const Tensor& grad_out) {
  if (!spec.transposed) throw ConfigError("deconv_backward called with a direct spec");
  check_input(input, w, spec);
  check_grad(input, spec, grad_out);
  const int in_h = input.height(), in_w = input.width();
  const int out_h = grad_out.height(), out_w = grad_out.width();
  const int kh = spec.kernel_h, kw = spec.kernel_w, s = spec.stride, p = spec.padding;
  const std::size_t taps = static_cast<std::size_t>(kh) * kw;

  ConvGrads g{Tensor(input.shape()), Tensor(w.kernel.shape()),
              std::vector<float>(static_cast<std::size_t>(spec.out_channels), 0.0f)};
  for (int o = 0; o < spec.out_channels; ++o) {
    const float* go = grad_out.plane(o);
    double acc = 0.0;
    for (std::size_t n = 0; n < static_cast<std::size_t>(out_h) * out_w; ++n) acc += go[n];
    g.bias[o] = static_cast<float>(acc);
  }

  std::vector<float> gcol;
  const int band = band_rows(static_cast<std::size_t>(spec.out_channels) * taps, in_w, in_h);
  for (int y0 = 0; y0 < in_h; y0 += band) {
    const int y1 = std::min(in_h, y0 + band);
    const std::size_t P = static_cast<std::size_t>(y1 - y0) * in_w;
    // Gather: gcol[(o, ky, kx)][iy, ix] = grad_out[o][iy*s+ky-p][ix*s+kx-p].
    gcol.assign(static_cast<std::size_t>(spec.out_channels) * taps * P, 0.0f);
    for (int o = 0; o < spec.out_channels; ++o) {
      const float* go = grad_out.plane(o);
      for (int ky = 0; ky < kh; ++ky) {
        const Span1 rows = transposed_range(in_h, out_h, s, p, ky);
        for (int kx = 0; kx < kw; ++kx) {
          const Span1 cols = transposed_range(in_w, out_w, s, p, kx);
          float* c = gcol.data() + (o * taps + static_cast<std::size_t>(ky) * kw + kx) * P;
          for (int iy = std::max(rows.lo, y0); iy < std::min(rows.hi, y1); ++iy) {
            const float* go_row = go + static_cast<std::size_t>(iy * s + ky - p) * out_w;
            float* c_row = c + static_cast<std::size_t>(iy - y0) * in_w;
            for (int ix = cols.lo; ix < cols.hi; ++ix) c_row[ix] = go_row[ix * s + kx - p];
          }
        }
      }
    }
    for (int o = 0; o < spec.out_channels; ++o)
      for (int i = 0; i < spec.in_channels; ++i) {
        const float* src = input.plane(i) + static_cast<std::size_t>(y0) * in_w;
        float* gi = g.input.plane(i) + static_cast<std::size_t>(y0) * in_w;
        const std::size_t base = (static_cast<std::size_t>(o) * spec.in_channels + i) * taps;
        for (std::size_t t = 0; t < taps; ++t) {
          const float* c = gcol.data() + (o * taps + t) * P;
          g.kernel[base + t] += dot(c, src, P);
          axpy(w.kernel[base + t], c, gi, P);
        }
      }
  }
  return g;
}

Tensor layer_forward(const Tensor& input, const LayerWeights& w, const ConvSpec& spec) {
  return spec.transposed ? deconv_forward(input, w, spec) : conv2d_forward(input, w, spec);
}

ConvGrads layer_backward(const Tensor& input, const LayerWeights& w, const ConvSpec& spec,
                         const Tensor& grad_out) {
  return spec.transposed ? deconv_backward(input, w, spec, grad_out)
                         : conv2d_backward(input, w, spec, grad_out);
}

Tensor prelu_forward(const Tensor& input, std::span<const float> slope) {
  if (input.rank() != 3 || slope.size() != static_cast<std::size_t>(input.channels())) {
    throw ConfigError("prelu slope length does not match input channels");
  }
  Tensor out(input.shape());
  const std::size_t plane = static_cast<std::size_t>(input.height()) * input.width();
  for (int c = 0; c < input.channels(); ++c) {
    const float a = slope[c];
    const float* src = input.plane(c);
    float* dst = out.plane(c);
    for (std::size_t n = 0; n < plane; ++n) dst[n] = src[n] >= 0.0f ? src[n] : a * src[n];
  }
  return out;
}

PreluGrads prelu_backward(const Tensor& input, std::span<const float> slope, const Tensor& grad_out) {
  if (input.rank() != 3 || slope.size() != static_cast<std::size_t>(input.channels())) {
    throw ConfigError("prelu slope length does not match input channels");
  }
  if (!grad_out.same_shape(input)) throw ConfigError("prelu grad_out shape mismatch");
  PreluGrads g{Tensor(input.shape()), std::vector<float>(slope.size(), 0.0f)};
  const std::size_t plane = static_cast<std::size_t>(input.height()) * input.width();
  for (int c = 0; c < input.channels(); ++c) {
    const float a = slope[c];
    const float* src = input.plane(c);
    const float* go = grad_out.plane(c);
    float* gi = g.input.plane(c);
    float ga = 0.0f;
    for (std::size_t n = 0; n < plane; ++n) {
      if (src[n] >= 0.0f) {
        gi[n] = go[n];
      } else {
        gi[n] = a * go[n];
        ga += go[n] * src[n];
      }
    }
    g.slope[c] = ga;
  }
  return g;
}

float l1_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw ConfigError("l1_loss shape mismatch");
  if (pred.empty()) throw ConfigError("l1_loss of empty tensors");
  double sum = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) sum += std::fabs(pred[n] - target[n]);
  return static_cast<float>(sum / static_cast<double>(pred.size()));
}

Tensor l1_loss_backward(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw ConfigError("l1_loss shape mismatch");
  if (pred.empty()) throw ConfigError("l1_loss of empty tensors");
  Tensor g(pred.shape());
  const float inv = 1.0f / static_cast<float>(pred.size());
  for (std::size_t n = 0; n < pred.size(); ++n) {
    const float d = pred[n] - target[n];
    g[n] = d > 0.0f ? inv : (d < 0.0f ? -inv : 0.0f);
  }
  return g;
}

void adam_step(std::span<const ParamGroup> groups, AdamState& state, const AdamOptions& opt) {
  if (state.first_moment.empty() && state.step == 0) {
    for (const ParamGroup& g : groups) {
      state.first_moment.emplace_back(g.value.size(), 0.0f);
      state.second_moment.emplace_back(g.value.size(), 0.0f);
    }
  }
  if (state.first_moment.size() != groups.size() || state.second_moment.size() != groups.size()) {
    throw ConfigError("adam state has a different number of parameter groups");
  }
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const ParamGroup& g = groups[k];
    if (g.grad.size() != g.value.size() || state.first_moment[k].size() != g.value.size() ||
        (!g.present.empty() && g.present.size() != g.value.size())) {
      throw ConfigError("adam parameter/gradient/moment sizes disagree");
    }
  }

  const std::int64_t t = ++state.step;
  const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(opt.beta1), static_cast<double>(t)));
  const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(opt.beta2), static_cast<double>(t)));
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const ParamGroup& g = groups[k];
    float* m = state.first_moment[k].data();
    float* v = state.second_moment[k].data();
    for (std::size_t n = 0; n < g.value.size(); ++n) {
      if (!g.present.empty() && !g.present[n]) continue;
      const float grad = g.grad[n];
      m[n] = opt.beta1 * m[n] + (1.0f - opt.beta1) * grad;
      v[n] = opt.beta2 * v[n] + (1.0f - opt.beta2) * grad * grad;
      const float m_hat = m[n] / c1;
      const float v_hat = v[n] / c2;
      g.value[n] -= g.lr_scale * opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps);
    }
  }
}

void kaiming_normal(Tensor& kernel, double fan_in, double gain, std::mt19937_64& rng) {
  if (fan_in <= 0.0) throw ConfigError("kaiming_normal needs a positive fan-in");
  std::normal_distribution<float> dist(0.0f, static_cast<float>(gain / std::sqrt(fan_in)));
  for (float& v : kernel.values()) v = dist(rng);
}

}  // namespace anysr
