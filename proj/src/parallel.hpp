// Copyright 2026 The DMT Authors
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

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dmt {

// Process-wide worker cap (the CLI's --jobs). 0 means hardware concurrency.
void set_max_jobs(unsigned jobs);
unsigned max_jobs();

namespace detail {
inline thread_local bool in_parallel_worker = false;
}

// Runs fn(i) for i in [0, n). Each index is independent and writes only its
// own output slot, so results do not depend on the worker count. Nested calls
// run inline on the calling worker.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const unsigned jobs = static_cast<unsigned>(std::min<std::size_t>(max_jobs(), n));
  if (jobs <= 1 || detail::in_parallel_worker) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    detail::in_parallel_worker = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
    detail::in_parallel_worker = false;
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs - 1);
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace dmt
