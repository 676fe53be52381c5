#pragma once

#include <cstddef>
#include <functional>

namespace diagfuse {

// Worker count: DIAGFUSE_WORKERS if set to a positive integer, else the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Calls fn(i) for i in [0, n) across worker_count() threads. The first
// exception thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Keeps freed tape buffers in the heap instead of returning them to the OS.
// Tapes allocate and free megabyte-sized tensors every step; without this
// each step pays fresh page faults. Call once from main().
void tune_allocator();

}  // namespace diagfuse
