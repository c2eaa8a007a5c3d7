#pragma once

#include <cstddef>
#include <functional>

namespace scanflow {

/// Caps the worker count used by parallel loops; 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(i) for i in [0, n) on up to thread_count() workers. Iterations
/// are handed out in contiguous chunks so callers that write to slot i get
/// deterministic results.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace scanflow
