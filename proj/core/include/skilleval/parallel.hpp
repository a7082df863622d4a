#pragma once

#include <cstddef>
#include <functional>

namespace skilleval {

// Worker count for parallel_for: SKILLEVAL_THREADS env var if set (>=1),
// else hardware concurrency.
int worker_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous static chunks,
// one per worker, so each index is computed exactly once and writes to
// disjoint output slots; results are identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace skilleval
