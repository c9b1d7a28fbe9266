#pragma once

#include <cstddef>
#include <functional>

namespace magweyl {

// Worker count used when an operation is not given one explicitly.
void set_default_threads(int threads);
int default_threads();

// Runs body(i) for i in [0, count) on up to `threads` workers (0: default).
// Work is split in contiguous blocks; body must only write data owned by i,
// so results do not depend on the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, int threads = 0);

}  // namespace magweyl
