#pragma once

#include <cstdint>
#include <functional>

namespace supergraph {

/// Worker count: min(hardware_concurrency, SUPERGRAPH_THREADS if set).
/// Read once per process.
int thread_cap();

/// Runs body(begin, end) over a contiguous partition of [0, n).
/// Chunks are fixed by n and the worker count, never by scheduling, so any
/// loop whose iterations write disjoint state is bitwise thread-count
/// independent.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace supergraph
