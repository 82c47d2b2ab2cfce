#pragma once

#include <cstddef>
#include <functional>

namespace dsmreg {

// Worker count used when a caller passes threads <= 0.
int default_thread_count();

// Splits [0, n) into contiguous chunks, one per worker, and runs `body(begin,
// end)` on each. The first exception thrown by any chunk is rethrown.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t begin, std::size_t end)>& body);

}  // namespace dsmreg
