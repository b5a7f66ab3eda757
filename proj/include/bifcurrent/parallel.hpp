#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bifcurrent {

/// Worker count: BIFCURRENT_WORKERS if set, else the hardware concurrency.
inline unsigned default_workers() {
  if (const char* env = std::getenv("BIFCURRENT_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return unsigned(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

/// results[k] = f(k) for k in [0, n). Tasks are pulled from a shared counter,
/// results land at their own index, so the output does not depend on the
/// number of workers or on scheduling. The first exception is rethrown.
template <typename F>
auto parallel_map(std::size_t n, F&& f, unsigned workers = default_workers())
    -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<R> out(n);
  if (workers <= 1 || n <= 1) {
    for (std::size_t k = 0; k < n; ++k) out[k] = f(k);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= n) return;
      try {
        out[k] = f(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned nthreads = unsigned(std::min<std::size_t>(workers, n));
  for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace bifcurrent
