#pragma once

#include <cstdint>
#include <functional>

namespace cgtex {

// Worker count for internal parallelism. Defaults to CGTEX_THREADS if set,
// otherwise the hardware concurrency. Changing it never changes results:
// every parallel loop assigns each output element a fixed accumulation order.
int worker_count();
void set_worker_count(int n);

// Runs fn(begin, end) over a partition of [0, n). With one worker this is a
// single direct call on the calling thread.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace cgtex
