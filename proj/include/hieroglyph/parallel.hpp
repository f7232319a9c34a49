#pragma once

#include <cstddef>
#include <functional>

namespace hieroglyph {

/// Worker count: HIEROGLYPH_THREADS when set (>= 1), else hardware concurrency.
unsigned thread_count();

/// Splits [0, n) into contiguous chunks and runs fn(begin, end) on each, possibly
/// concurrently. Chunks write disjoint outputs, so results do not depend on the
/// number of threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace hieroglyph
