#pragma once

#include <cstddef>
#include <functional>

namespace tgssl {

/// Worker count: hardware concurrency capped by the TGSSL_THREADS
/// environment variable (>= 1).
int worker_count();

/// Runs fn(0..n-1). Each index must write only its own output slot; results
/// are then independent of the thread count, which keeps seeded runs
/// byte-identical. Reductions over the outputs stay sequential.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tgssl
