#pragma once

#include <cstddef>
#include <functional>

namespace fdd {

/// Process-wide cap on worker threads for bag- and column-parallel loops.
/// Defaults to 1 (fully serial). Loop bodies write disjoint state, so results
/// are identical for any thread count.
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs fn(i) for every i in [0, n), possibly on several threads.
void parallel_for_index(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fdd
