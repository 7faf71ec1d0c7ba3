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

#ifndef ANYSR_IO_HPP_
#define ANYSR_IO_HPP_

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "anysr/tensor.hpp"

namespace anysr {

// Images are 3xHxW tensors holding 8-bit values as floats in [0,255].
// Grayscale inputs are replicated to three channels.

// PNG (8-bit, any colour type; alpha is dropped) or binary PPM (P6, maxval
// 255), detected by signature. 16-bit data is rejected.
Tensor read_image(const std::filesystem::path& path);

// Rounds and clamps to 8 bits. The format follows the extension (.png/.ppm).
void write_image(const std::filesystem::path& path, const Tensor& image);

Tensor decode_ppm(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_ppm(const Tensor& image);
Tensor decode_png(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_png(const Tensor& image);

// Files in `dir` whose extension (case-insensitive) is in `extensions`,
// sorted lexicographically. Other regular files are reported on `warn`.
std::vector<std::filesystem::path> scan_dataset(const std::filesystem::path& dir,
                                                std::span<const std::string> extensions = {},
                                                std::ostream* warn = nullptr);

}  // namespace anysr

#endif  // ANYSR_IO_HPP_
