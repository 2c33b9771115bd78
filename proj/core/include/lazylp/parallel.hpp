#pragma once

#include <cstddef>
#include <functional>

namespace lazylp {

// Worker cap from RAMMSTEIN_THREADS, else hardware concurrency (at least 1).
std::size_t worker_count();

// Runs body(i) for i in [0, n) on up to worker_count() threads. Iterations must
// be independent; results are identical to a sequential run.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace lazylp
