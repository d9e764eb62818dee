#pragma once

#include <cstddef>
#include <functional>

namespace segrefine {

// Worker count: SEGREFINE_THREADS if set and positive, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Splits [0, n) into contiguous chunks, one per worker, and blocks until
// all chunks are done. Chunk boundaries depend only on n and the worker
// count, so per-index work stays deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t begin, std::size_t end)>& body);

}  // namespace segrefine
