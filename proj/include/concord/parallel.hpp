#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace concord {

/// Worker count: CONCORD_THREADS when set and positive, otherwise the
/// hardware concurrency.
inline int thread_budget() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CONCORD_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) n = v;
    } catch (...) {
    }
  }
  return std::max(1, n);
}

namespace detail {
inline thread_local bool in_worker = false;
}

/// Runs fn(0..n-1) on up to thread_budget() threads. Each index must write
/// only to its own output slot. The first exception thrown by any task is
/// rethrown after all workers finish. Nested calls from inside a worker run
/// sequentially.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  const int workers = detail::in_worker ? 1 : std::min(n, thread_budget());
  if (workers <= 1) {
    for (int k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      detail::in_worker = true;
      for (int k = next++; k < n; k = next++) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace concord
