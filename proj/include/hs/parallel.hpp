#pragma once

#include <cstddef>
#include <functional>

namespace hs {

/// Worker count: HS_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
unsigned worker_count();

/// Runs body(begin, end) over contiguous chunks of [0, n) on worker threads.
/// The first exception thrown by a worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

/// Runs task(k) for k in [0, n), handing out indices one at a time; meant for
/// few, coarse tasks. The first exception thrown is rethrown.
void parallel_tasks(std::size_t n, const std::function<void(std::size_t)>& task);

}  // namespace hs
