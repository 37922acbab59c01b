#pragma once

#include <malloc.h>

namespace meshshift {

/// Keeps large tensor buffers on the heap instead of fresh mmap regions, which
/// avoids repeated page faults when a training step reallocates the same sizes.
inline void tune_allocator() {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
}

}  // namespace meshshift
