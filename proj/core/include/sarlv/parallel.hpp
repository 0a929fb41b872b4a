#pragma once

#include <cstdint>
#include <functional>

namespace sarlv {

/// Number of worker threads in the shared pool. Reads SARLV_THREADS once;
/// defaults to the hardware concurrency (capped at 16).
int thread_count();

/// Run fn over [0, n) partitioned into contiguous chunks, one per worker.
/// Each index is touched by exactly one invocation, so results are bitwise
/// identical for any thread count. Calls from inside a worker run inline.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace sarlv
