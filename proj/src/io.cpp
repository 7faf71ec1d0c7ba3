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

#include "anysr/io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "anysr/error.hpp"

namespace anysr {
namespace {

const std::vector<std::string> kDefaultExtensions{".png", ".ppm"};

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void check_rgb(const Tensor& image) {
  if (image.rank() != 3 || image.channels() != 3 || image.height() <= 0 || image.width() <= 0) {
    throw ConfigError("expected a non-empty 3xHxW image, got " + shape_string(image.shape()));
  }
}

unsigned char to_byte(float v) { return static_cast<unsigned char>(std::clamp(std::nearbyint(v), 0.0f, 255.0f)); }

std::vector<unsigned char> interleave(const Tensor& image) {
  const std::size_t n = static_cast<std::size_t>(image.height()) * image.width();
  std::vector<unsigned char> out(3 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) out[3 * i + static_cast<std::size_t>(c)] = to_byte(image.plane(c)[i]);
  return out;
}

Tensor deinterleave(const unsigned char* rgb, int h, int w) {
  Tensor image({3, h, w});
  const std::size_t n = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) image.plane(c)[i] = rgb[3 * i + static_cast<std::size_t>(c)];
  return image;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// PPM header token, skipping whitespace and '#' comments.
std::string ppm_token(std::span<const unsigned char> b, std::size_t& pos) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < b.size() && !std::isspace(b[pos]) && b[pos] != '#') tok.push_back(static_cast<char>(b[pos++]));
  if (tok.empty()) throw FormatError("PPM header truncated");
  return tok;
}

int ppm_int(std::span<const unsigned char> b, std::size_t& pos) {
  const std::string t = ppm_token(b, pos);
  if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
      t.size() > 9) {
    throw FormatError("PPM header: bad number '" + t + "'");
  }
  return std::stoi(t);
}

}  // namespace

Tensor decode_ppm(std::span<const unsigned char> b) {
  std::size_t pos = 0;
  if (ppm_token(b, pos) != "P6") throw FormatError("only binary PPM (P6) is supported");
  const int w = ppm_int(b, pos), h = ppm_int(b, pos), maxval = ppm_int(b, pos);
  if (w <= 0 || h <= 0) throw FormatError("PPM has empty extent");
  if (maxval != 255) throw FormatError("unsupported PPM maxval " + std::to_string(maxval) + " (only 8-bit)");
  if (pos >= b.size() || !std::isspace(b[pos])) throw FormatError("PPM header truncated");
  ++pos;
  const std::size_t need = 3 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (b.size() - pos < need) throw FormatError("PPM pixel data truncated");
  return deinterleave(b.data() + pos, h, w);
}

std::vector<unsigned char> encode_ppm(const Tensor& image) {
  check_rgb(image);
  const std::string header = "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  const std::vector<unsigned char> px = interleave(image);
  out.insert(out.end(), px.begin(), px.end());
  return out;
}

Tensor decode_png(std::span<const unsigned char> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("PNG decode failed: " + msg);
  }
  if (img.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&img);
    throw FormatError("unsupported PNG bit depth: only 8-bit images are supported");
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> rgb(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("PNG decode failed: " + msg);
  }
  return deinterleave(rgb.data(), static_cast<int>(img.height), static_cast<int>(img.width));
}

std::vector<unsigned char> encode_png(const Tensor& image) {
  check_rgb(image);
  const std::vector<unsigned char> rgb = interleave(image);
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
    throw FormatError(std::string("PNG encode failed: ") + img.message);
  }
  std::vector<unsigned char> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
    throw FormatError(std::string("PNG encode failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

Tensor read_image(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_bytes(path);
  static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  try {
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  throw FormatError(path.string() + ": not a PNG or binary PPM file");
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
  const std::string ext = lower(path.extension().string());
  std::vector<unsigned char> bytes;
  if (ext == ".png") {
    bytes = encode_png(image);
  } else if (ext == ".ppm") {
    bytes = encode_ppm(image);
  } else {
    throw ConfigError("cannot infer image format from extension '" + ext + "' (use .png or .ppm)");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open image for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing image: " + path.string());
}

std::vector<std::filesystem::path> scan_dataset(const std::filesystem::path& dir,
                                                std::span<const std::string> extensions, std::ostream* warn) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  const std::span<const std::string> exts = extensions.empty() ? std::span<const std::string>(kDefaultExtensions) : extensions;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = lower(entry.path().extension().string());
    if (std::find(exts.begin(), exts.end(), ext) != exts.end()) {
      files.push_back(entry.path());
    } else if (warn) {
      *warn << "warning: skipping non-image file " << entry.path().string() << "\n";
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace anysr
