#pragma once

#include <cstddef>
#include <functional>

namespace physiodecode {

// Worker count: PHYSIODECODE_THREADS if set, else hardware concurrency.
unsigned default_thread_count();

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
// processed exactly once; callers write results into pre-sized slots so the
// output never depends on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  unsigned threads = 0);

}  // namespace physiodecode
