#pragma once

#include <cstdint>
#include <functional>

namespace fringeforge {

/// Number of workers used by parallel_for. Honors the FRINGEFORGE_THREADS
/// environment variable (0 or unset means hardware concurrency).
int worker_count();

/// Runs fn over contiguous sub-ranges of [begin, end). Callers must only
/// write to disjoint per-index outputs; reductions that depend on evaluation
/// order have to stay sequential so results are identical for every thread
/// count.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace fringeforge
