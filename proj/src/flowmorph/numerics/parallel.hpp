#pragma once

#include <cstddef>
#include <functional>

namespace fm::numerics {

// Worker count used when a caller passes threads <= 0. Starts at the
// hardware concurrency.
int default_threads();
void set_default_threads(int threads);

// Runs fn(0..n-1) over up to `threads` workers. Each index runs exactly once;
// callers write results by index so the outcome does not depend on
// scheduling. The exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace fm::numerics
