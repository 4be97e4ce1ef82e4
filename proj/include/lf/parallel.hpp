#pragma once

#include <cstddef>
#include <functional>

namespace lf {

// Worker count pinned from LF_THREADS (default 1). Read once per process.
int worker_count();

// Splits [0, count) into contiguous ranges, one per worker. Each element is
// processed by exactly one worker with identical per-element arithmetic, so
// results are bitwise independent of the worker count. Nested calls run the
// body inline.
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t begin, std::size_t end)>& body);

}  // namespace lf
