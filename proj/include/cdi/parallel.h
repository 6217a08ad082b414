// Copyright 2026 The CDI Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CDI_PARALLEL_H_
#define CDI_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace cdi {

// Worker count: the CDI_THREADS environment variable when set to a positive
// integer, otherwise std::thread::hardware_concurrency().
size_t DefaultThreadCount();

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = default).
// Indices are claimed dynamically; callers write results into slot i so the
// output order does not depend on the schedule. The first exception thrown
// by any task is rethrown after all workers finish.
void ParallelFor(size_t n, const std::function<void(size_t)>& fn, size_t threads = 0);

}  // namespace cdi

#endif  // CDI_PARALLEL_H_
