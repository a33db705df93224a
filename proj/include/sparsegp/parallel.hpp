#pragma once

#include <cstddef>
#include <functional>

namespace sparsegp {

/// Worker count from SPARSEGP_WORKERS if set, else the hardware concurrency (>= 1).
std::size_t default_worker_count();

/// Runs task(k) for k in [0, count) on up to `workers` threads. If tasks throw,
/// the exception of the lowest failing index is rethrown after all threads join,
/// so failures are reported identically for every worker count.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& task);

}  // namespace sparsegp
