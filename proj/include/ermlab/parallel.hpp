#pragma once

#include <cstddef>
#include <functional>

namespace ermlab {

/// Process-wide worker count used by parallel_for. Defaults to 1.
void set_num_threads(int threads);
int num_threads();

/// Runs body(i) for i in [0, n). Items are split into contiguous blocks, one
/// per worker; callers write results into slot i so the outcome is identical
/// for any thread count. Nested calls run serially on the calling thread.
/// The first exception thrown by any item is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace ermlab
