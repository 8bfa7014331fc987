#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace edgelab {

inline int default_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Runs fn(i) for i in [0, n). Each unit of work must write only to its own
// output slot; callers reduce results in index order afterwards, so the
// combined result is identical at any thread count. threads <= 0 selects
// the hardware default.
inline void parallel_for(int n, int threads,
                         const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (threads <= 0) threads = default_threads();
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([=, &fn] {
      for (int i = t; i < n; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace edgelab
