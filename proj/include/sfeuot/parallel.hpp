#pragma once

#include <cstddef>
#include <functional>

namespace sfeuot {

// Worker count for data-parallel loops. 0 selects the single-threaded
// reference mode.
void set_num_threads(std::size_t n);
std::size_t num_threads();

// Splits [0, n) into `chunks` contiguous ranges (independent of the thread
// count) and runs fn(chunk_index, begin, end) for each. Reductions that sum
// per-chunk partials in chunk order are bit-identical across thread counts.
void parallel_chunks(std::size_t n, std::size_t chunks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

// Raises the allocator's mmap and trim thresholds so the large, short-lived
// activation buffers of a training step are recycled from the heap instead of
// being mapped and faulted in on every step. No-op outside glibc.
void tune_allocator();

}  // namespace sfeuot
