// Malloc-family interposition that maintains a live-byte counter and a
// high-water mark. Definitions here shadow the libc symbols at link time;
// the real allocator is resolved lazily through dlsym(RTLD_NEXT, ...). The
// dlsym call itself allocates, so a small static bump allocator serves those
// bootstrap requests (its bytes are deliberately leaked).

#include "alloc_tracker.hpp"

#include <dlfcn.h>
#include <malloc.h>

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace {

using MallocFn = void* (*)(std::size_t);
using FreeFn = void (*)(void*);
using CallocFn = void* (*)(std::size_t, std::size_t);
using ReallocFn = void* (*)(void*, std::size_t);
using AlignedAllocFn = void* (*)(std::size_t, std::size_t);
using PosixMemalignFn = int (*)(void**, std::size_t, std::size_t);

MallocFn g_real_malloc = nullptr;
FreeFn g_real_free = nullptr;
CallocFn g_real_calloc = nullptr;
ReallocFn g_real_realloc = nullptr;
AlignedAllocFn g_real_aligned_alloc = nullptr;
PosixMemalignFn g_real_posix_memalign = nullptr;

bool g_resolving = false;

alignas(16) char g_bootstrap[1 << 16];
std::size_t g_bootstrap_used = 0;

std::atomic<long long> g_live{0};
std::atomic<long long> g_peak{0};
std::atomic<long long> g_base{0};
std::atomic<long long> g_max_single{0};

bool in_bootstrap(const void* p) {
  return p >= g_bootstrap && p < g_bootstrap + sizeof(g_bootstrap);
}

void* bootstrap_alloc(std::size_t n) {
  const std::size_t aligned = (n + 15u) & ~static_cast<std::size_t>(15u);
  if (g_bootstrap_used + aligned > sizeof(g_bootstrap)) std::abort();
  void* p = g_bootstrap + g_bootstrap_used;
  g_bootstrap_used += aligned;
  return p;
}

void resolve() {
  g_resolving = true;
  g_real_malloc = reinterpret_cast<MallocFn>(dlsym(RTLD_NEXT, "malloc"));
  g_real_free = reinterpret_cast<FreeFn>(dlsym(RTLD_NEXT, "free"));
  g_real_calloc = reinterpret_cast<CallocFn>(dlsym(RTLD_NEXT, "calloc"));
  g_real_realloc = reinterpret_cast<ReallocFn>(dlsym(RTLD_NEXT, "realloc"));
  g_real_aligned_alloc = reinterpret_cast<AlignedAllocFn>(dlsym(RTLD_NEXT, "aligned_alloc"));
  g_real_posix_memalign =
      reinterpret_cast<PosixMemalignFn>(dlsym(RTLD_NEXT, "posix_memalign"));
  g_resolving = false;
  if (!g_real_malloc || !g_real_free) std::abort();
}

void record_alloc(void* p) {
  if (!p) return;
  const long long size = static_cast<long long>(malloc_usable_size(p));
  const long long live = g_live.fetch_add(size, std::memory_order_relaxed) + size;
  long long peak = g_peak.load(std::memory_order_relaxed);
  while (live > peak &&
         !g_peak.compare_exchange_weak(peak, live, std::memory_order_relaxed)) {
  }
  long long single = g_max_single.load(std::memory_order_relaxed);
  while (size > single &&
         !g_max_single.compare_exchange_weak(single, size, std::memory_order_relaxed)) {
  }
}

void record_free(void* p) {
  if (!p || in_bootstrap(p)) return;
  g_live.fetch_sub(static_cast<long long>(malloc_usable_size(p)),
                   std::memory_order_relaxed);
}

}  // namespace

extern "C" {

void* malloc(std::size_t n) {
  if (!g_real_malloc) {
    if (g_resolving) return bootstrap_alloc(n);
    resolve();
  }
  void* p = g_real_malloc(n);
  record_alloc(p);
  return p;
}

void free(void* p) {
  if (!p || in_bootstrap(p)) return;
  if (!g_real_free) resolve();
  record_free(p);
  g_real_free(p);
}

void* calloc(std::size_t count, std::size_t size) {
  if (!g_real_calloc) {
    if (g_resolving) {
      void* p = bootstrap_alloc(count * size);
      std::memset(p, 0, count * size);
      return p;
    }
    resolve();
  }
  void* p = g_real_calloc(count, size);
  record_alloc(p);
  return p;
}

void* realloc(void* old, std::size_t n) {
  if (!g_real_realloc) resolve();
  if (old && in_bootstrap(old)) {
    // Unknown original size; give it a fresh block and copy conservatively.
    void* p = g_real_malloc(n);
    record_alloc(p);
    if (p) std::memcpy(p, old, n);
    return p;
  }
  record_free(old);
  void* p = g_real_realloc(old, n);
  record_alloc(p);
  return p;
}

void* aligned_alloc(std::size_t alignment, std::size_t n) {
  if (!g_real_aligned_alloc) resolve();
  void* p = g_real_aligned_alloc(alignment, n);
  record_alloc(p);
  return p;
}

int posix_memalign(void** out, std::size_t alignment, std::size_t n) {
  if (!g_real_posix_memalign) resolve();
  const int rc = g_real_posix_memalign(out, alignment, n);
  if (rc == 0) record_alloc(*out);
  return rc;
}

}  // extern "C"

namespace alloc_tracker {

void reset() {
  const long long live = g_live.load(std::memory_order_relaxed);
  g_base.store(live, std::memory_order_relaxed);
  g_peak.store(live, std::memory_order_relaxed);
  g_max_single.store(0, std::memory_order_relaxed);
}

std::size_t peak_bytes() {
  const long long delta =
      g_peak.load(std::memory_order_relaxed) - g_base.load(std::memory_order_relaxed);
  return delta > 0 ? static_cast<std::size_t>(delta) : 0u;
}

std::size_t max_single_bytes() {
  return static_cast<std::size_t>(g_max_single.load(std::memory_order_relaxed));
}

}  // namespace alloc_tracker
