#pragma once

#include <cstddef>
#include <functional>

namespace nlb {

/// Number of worker threads: NLB_THREADS when set to a positive integer,
/// otherwise the hardware concurrency. Read on every call.
unsigned thread_count();

/// Splits [0, n) into at most thread_count() contiguous chunks of at least
/// `min_chunk` items and runs fn(begin, end) on each. The first exception
/// thrown by a worker is rethrown on the calling thread.
void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace nlb
