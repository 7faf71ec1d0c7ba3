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

#ifndef ANYSR_CLI_HPP_
#define ANYSR_CLI_HPP_

#include <ostream>

namespace anysr {

// Exit codes of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// The `anysr` command line: train, build-tables, infer, eval and flops.
// Options may also come from an INI/TOML file given by --config; flags win
// over the file, the file over built-in defaults, and unknown keys are
// rejected. Never calls exit().
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace anysr

#endif  // ANYSR_CLI_HPP_
