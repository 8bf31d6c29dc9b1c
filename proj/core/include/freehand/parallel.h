// Copyright 2026 The Freehand Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal static-partition parallel loop.

#ifndef FREEHAND_PARALLEL_H_
#define FREEHAND_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace freehand {

// Worker count: `requested` if positive, else hardware concurrency, capped
// by the FREEHAND_THREADS environment variable when set.
int WorkerCount(int requested = 0);

// Runs body(i) for i in [0, n). Indices are split into contiguous chunks, so
// results written to per-index slots are independent of the thread count.
// The first exception thrown by any worker is rethrown on the caller.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& body,
                 int threads = 0);

}  // namespace freehand

#endif  // FREEHAND_PARALLEL_H_
