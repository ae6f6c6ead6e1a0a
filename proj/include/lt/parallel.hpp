#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace lt {

// Worker cap: LT_THREADS if set, else hardware concurrency (clamped).
// Only pure per-node maps with disjoint writes are parallelized, so results
// are identical for every worker count. Reductions stay sequential.
inline int worker_count() {
  static const int n = [] {
    if (const char* env = std::getenv("LT_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v >= 1) return static_cast<int>(std::min<long>(v, 256));
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 8u));
  }();
  return n;
}

template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
  const int workers = worker_count();
  if (workers <= 1 || n < 4096) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  std::mutex err_mutex;
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  for (int t = 0; t < workers; ++t) {
    const std::int64_t lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn, &err_mutex, &err, &failed] {
      try {
        for (std::int64_t i = lo; i < hi && !failed.load(std::memory_order_relaxed); ++i)
          fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace lt
