#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace brlab {

inline unsigned hardware_threads() {
  if (const char* env = std::getenv("BRLAB_THREADS")) {
    long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

namespace detail {
inline thread_local bool inside_parallel_for = false;
}

// Deterministic parallel loop: work item i always computes the same result
// regardless of the thread count. Nested calls run serially.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  unsigned workers = hardware_threads();
  if (workers <= 1 || n <= 1 || detail::inside_parallel_for) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      detail::inside_parallel_for = true;
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

} // namespace brlab
