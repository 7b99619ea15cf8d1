#pragma once

// Tiny slot-parallel map: results land in slot i regardless of which worker
// computed them, so parallel output is byte-identical to the sequential run.

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dvt {

template <typename R, typename F>
std::vector<R> parallel_slots(int n, int jobs, F&& f) {
  std::vector<R> out(static_cast<std::size_t>(n));
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = f(i);
    return out;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  const auto worker = [&] {
    for (int i; (i = next.fetch_add(1)) < n;) {
      try {
        out[static_cast<std::size_t>(i)] = f(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();
  if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace dvt
