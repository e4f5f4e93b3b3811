#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tlasso {

// Runs fn(task) for task in [0, n_tasks) on up to `workers` threads. Tasks
// are claimed dynamically, so callers must make each task's output depend
// only on the task index (never on which thread ran it) to stay
// deterministic. The first exception thrown by any task is rethrown.
template <class Fn>
void parallel_for(int workers, int n_tasks, Fn&& fn) {
  if (workers <= 1 || n_tasks <= 1) {
    for (int t = 0; t < n_tasks; ++t) fn(t);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const int t = next.fetch_add(1, std::memory_order_relaxed);
      if (t >= n_tasks) return;
      try {
        fn(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const int extra = std::min(workers, n_tasks) - 1;
    pool.reserve(extra);
    for (int w = 0; w < extra; ++w) pool.emplace_back(body);
    body();
  }
  if (error) std::rethrow_exception(error);
}

// Number of fixed-size chunks covering n items.
inline int chunk_count(int n, int chunk) { return (n + chunk - 1) / chunk; }

}  // namespace tlasso
