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

#ifndef ANYSR_PARALLEL_HPP_
#define ANYSR_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace anysr {

// Caps the worker count used by parallel_for (0 = hardware concurrency).
void set_max_threads(int n);
int max_threads();

// Calls fn(i) for i in [0, n) over up to max_threads() workers using static
// contiguous chunks. The first exception thrown by any call is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace anysr

#endif  // ANYSR_PARALLEL_HPP_
