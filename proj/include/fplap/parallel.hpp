#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fpl {

/// Upper bound on worker threads used by parallel_for. 0 means hardware
/// concurrency.
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs body(i) for i in [0, count). Each index is processed exactly once;
/// callers write results into per-index slots so the outcome does not depend
/// on scheduling.
template <class Body>
void parallel_for(int count, Body &&body)
{
  const unsigned workers =
    std::min<unsigned>(max_threads(), static_cast<unsigned>(std::max(count, 0)));
  if (workers <= 1)
    {
      for (int i = 0; i < count; ++i)
        body(i);
      return;
    }

  std::atomic<int>   next{0};
  std::exception_ptr failure;
  std::mutex         failure_mutex;
  auto               run = [&]() {
    for (int i = next++; i < count; i = next++)
      {
        try
          {
            body(i);
          }
        catch (...)
          {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure)
              failure = std::current_exception();
          }
      }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned t = 1; t < workers; ++t)
    pool.emplace_back(run);
  run();
  for (auto &th : pool)
    th.join();
  if (failure)
    std::rethrow_exception(failure);
}

} // namespace fpl
