#pragma once

// Chunked parallel map. Work is split into chunks whose boundaries depend only
// on the problem size, never on the worker count; results come back in chunk
// order, so any reduction over them is deterministic.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace s2wb {

/// Worker count from S2WB_THREADS, else `fallback` (0 means hardware concurrency).
inline unsigned worker_count(unsigned fallback = 0) {
  if (const char* env = std::getenv("S2WB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  if (fallback > 0) return fallback;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(chunk) for chunk in [0, chunks) on `workers` threads and returns
/// the results indexed by chunk. The first exception thrown is rethrown.
template <typename Fn>
auto parallel_chunks(std::size_t chunks, unsigned workers, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}));
  std::vector<Result> results(chunks);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(chunks, 1))));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) results[c] = fn(c);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) {
        try {
          results[c] = fn(c);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace s2wb
