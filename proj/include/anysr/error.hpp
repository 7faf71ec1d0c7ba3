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

#ifndef ANYSR_ERROR_HPP_
#define ANYSR_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace anysr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes, widths or hyperparameters that cannot work together.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable, truncated or corrupted files.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf showed up where every value must be finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace anysr

#endif  // ANYSR_ERROR_HPP_
