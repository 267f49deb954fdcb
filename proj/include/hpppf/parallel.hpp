#pragma once

#include <cstddef>
#include <functional>

namespace hpppf {

/// Global worker cap. 0 = hardware concurrency. Resolved at call time;
/// the HPPPF_THREADS environment variable is the fallback when unset.
void set_thread_count(int threads);
int thread_count();

// Runs fn(i) for i in [0, n). Work is split into fixed contiguous chunks so
// each index is always processed by exactly one worker; any output written
// per index is identical for every thread count, including 1.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace hpppf
