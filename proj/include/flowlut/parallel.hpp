#pragma once

#include <cstddef>
#include <functional>

namespace flowlut {

/// Worker count for pixel-parallel stages. Defaults to FLOWLUT_THREADS when
/// set, else the number of logical processors.
std::size_t num_threads();
void set_num_threads(std::size_t n);

/// Splits [0, n) into contiguous chunks and runs fn(begin, end) on each.
/// Chunks are disjoint; fn must only write state owned by its range.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

/// Keeps freed feature-map buffers in the heap instead of returning them to
/// the OS, so the next forward pass does not fault in fresh pages. Meant for
/// executables; no-op outside glibc.
void tune_allocator();

}  // namespace flowlut
