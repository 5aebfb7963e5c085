// Copyright 2026 The htrner Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>

namespace htrner {

// Worker cap: HTRNER_NUM_WORKERS when set (minimum 1), otherwise the
// hardware concurrency.
int worker_count();

// Runs fn(0..n-1) across up to worker_count() threads. Results must be
// written to per-index slots; callers reduce them in index order afterwards
// so floating-point sums stay identical under any worker count. The first
// exception (lowest index) is rethrown after all workers finish.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace htrner
