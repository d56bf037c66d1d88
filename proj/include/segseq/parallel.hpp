#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace segseq {

/// Runs body(k) for k in [0, count) on up to `threads` workers with static
/// interleaved partitioning. Each index writes only its own outputs, so the
/// results do not depend on the worker count. The first exception thrown by
/// any worker is rethrown on the caller.
template <typename Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (std::size_t k = t; k < count; k += threads) body(k);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

/// --threads value, falling back to SEGSEQ_THREADS and then 1.
std::size_t resolve_threads(std::size_t requested);

}  // namespace segseq
