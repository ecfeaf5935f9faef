#pragma once

#include <cstddef>
#include <functional>

namespace mxl {

/// Worker count: MXL_WORKERS if set to a positive integer, else hardware concurrency.
unsigned default_workers();

/// Runs fn(0) ... fn(count-1) on up to `workers` threads. Each index is handled
/// exactly once; callers write results by index so aggregation order is fixed.
/// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  unsigned workers = default_workers());

}  // namespace mxl
