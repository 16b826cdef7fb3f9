#pragma once

#include <cstddef>
#include <functional>

namespace semsplat {

/// Worker count: SEMSPLAT_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
int worker_count();

/// Runs `fn(i)` for every i in [0, n). Work items must be independent; callers
/// that reduce results do so afterwards in index order, so output never depends
/// on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace semsplat
