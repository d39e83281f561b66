#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace lcpm {

// Runs fn(0..n-1) over `jobs` threads in contiguous chunks. Results must
// be written to per-index slots so the outcome is independent of the job
// count. The first exception thrown by any chunk is rethrown.
inline void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (jobs <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = std::min(jobs, n);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w]() {
      try {
        const int begin = w * chunk;
        const int end = std::min(n, begin + chunk);
        for (int i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace lcpm
