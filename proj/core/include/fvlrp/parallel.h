// Copyright 2026 The fvlrp Authors.
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

#include <cstddef>
#include <functional>

namespace fvlrp {

// Process-wide cap on worker threads (1 = serial). Results never depend on
// this value: parallel loops only write to per-index slots and every
// reduction runs afterwards in index order.
void SetThreadCount(int threads);
int ThreadCount();

// Calls fn(i) for every i in [0, n), split into contiguous chunks across at
// most ThreadCount() threads. The first exception thrown by any worker is
// rethrown on the calling thread.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fvlrp
