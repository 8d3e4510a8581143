#pragma once

#include <atomic>
#include <cstddef>
#include <mutex>
#include <thread>
#include <vector>

namespace mpacdc {

// Global worker count for per-item parallel stages (CLI --threads).
inline int& worker_threads() {
  static int n = 1;
  return n;
}

// Parallel loop over [0, n). Each item writes only to its own output slot,
// so results are independent of the thread count; any cross-item reduction
// has to happen after the join, in index order.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const int nt = worker_threads();
  if (nt <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mutex;
  const int use = static_cast<int>(std::min<std::size_t>(nt, n));
  pool.reserve(use);
  for (int t = 0; t < use; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace mpacdc
