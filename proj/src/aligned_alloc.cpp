// SPDX-License-Identifier: Apache-2.0
//
// 64-byte-aligned global allocation. Buffer alignment selects SIMD peeling
// paths inside Eigen kernels; pinning every allocation to one alignment makes
// fp32 results bitwise reproducible across runs regardless of heap layout.

#include <malloc.h>

#include <cstdlib>
#include <new>

namespace {

constexpr std::size_t kAlign = 64;

// Keep the large per-step tape buffers on the heap free lists instead of
// returning them to the kernel between steps.
const int malloc_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return 0;
}();

void* aligned_new(std::size_t size) {
  if (size == 0) size = 1;
  void* p = nullptr;
  if (posix_memalign(&p, kAlign, size) != 0) throw std::bad_alloc();
  return p;
}

}  // namespace

void* operator new(std::size_t size) { return aligned_new(size); }
void* operator new[](std::size_t size) { return aligned_new(size); }
void* operator new(std::size_t size, const std::nothrow_t&) noexcept {
  void* p = nullptr;
  return posix_memalign(&p, kAlign, size ? size : 1) == 0 ? p : nullptr;
}
void* operator new[](std::size_t size, const std::nothrow_t&) noexcept {
  void* p = nullptr;
  return posix_memalign(&p, kAlign, size ? size : 1) == 0 ? p : nullptr;
}

void operator delete(void* p) noexcept { std::free(p); }
void operator delete[](void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t) noexcept { std::free(p); }
void operator delete(void* p, const std::nothrow_t&) noexcept { std::free(p); }
void operator delete[](void* p, const std::nothrow_t&) noexcept { std::free(p); }
