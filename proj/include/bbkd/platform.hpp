#pragma once

namespace bbkd {

/// Keeps large short-lived buffers (convolution patch matrices) on the heap
/// instead of fresh mmap pages. Call once at process start; no-op off glibc.
void tune_allocator() noexcept;

}  // namespace bbkd
