#pragma once

#include <cstddef>
#include <functional>

namespace relight {

// Worker count used when an options struct leaves `threads` at 0.
std::size_t default_thread_count();
void set_default_thread_count(std::size_t threads);

// Runs body(begin, end) over a static partition of [0, n). The partition
// depends only on n and the resolved thread count, and every index is
// visited exactly once, so bodies writing disjoint outputs are deterministic.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace relight
