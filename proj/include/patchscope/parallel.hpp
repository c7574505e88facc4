#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace patchscope {

/// Worker count from PATCHSCOPE_THREADS, else `fallback`.
int default_workers(int fallback = 1);

/// Calls fn(i) for every i in [0, n) on up to `workers` threads. Items are
/// claimed dynamically, so callers must write results into per-index slots
/// and reduce them afterwards in index order. The first exception thrown by
/// fn is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(body);
  pool.clear();  // joins
  if (error) std::rethrow_exception(error);
}

}  // namespace patchscope
