#pragma once

#include <cstdint>
#include <functional>

namespace transferlab {

/// Resolves the worker count for a job: `requested` if positive, otherwise the
/// TRANSFERLAB_THREADS environment variable, otherwise 1 (sequential,
/// reproducible default).
int resolve_threads(int requested);

/// Runs fn(begin, end) over [0, count) split into contiguous chunks, one per
/// worker. Each index is processed by exactly one worker and results must be
/// written to disjoint slots, so the output is identical for any thread count.
/// threads <= 1 runs inline.
void parallel_for(std::int64_t count, int threads,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace transferlab
