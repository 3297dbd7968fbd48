#pragma once

#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

#include "dgstream/dep_graph.hpp"

namespace dgstream {

/// Two-queue dependency-respecting executor. Events wait in UnExec until
/// every direct dependency completed, move to the ready queue (Exec), and are
/// taken by worker threads. The ready queue is ordered by event index, so a
/// single worker degenerates to exact stream order. Returns the completion
/// order. An executor exception aborts the window and is rethrown.
inline std::vector<std::uint32_t> run_schedule(const DepGraph& graph,
                                               const std::function<void(std::size_t)>& executor,
                                               std::size_t workers) {
  std::size_t n = graph.count;
  std::vector<std::uint32_t> completion;
  completion.reserve(n);
  if (n == 0) return completion;

  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      executor(i);
      completion.push_back(static_cast<std::uint32_t>(i));
    }
    return completion;
  }

  std::mutex mu;
  std::condition_variable cv;
  std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> ready;
  std::vector<std::uint32_t> pending(n);
  std::size_t done = 0;
  std::exception_ptr failure;

  for (std::size_t i = 0; i < n; ++i) {
    pending[i] = static_cast<std::uint32_t>(graph.deps[i].size());
    if (pending[i] == 0) ready.push(static_cast<std::uint32_t>(i));
  }

  auto worker = [&]() {
    std::unique_lock lock(mu);
    for (;;) {
      cv.wait(lock, [&] { return !ready.empty() || done == n || failure; });
      if (failure || done == n) return;
      std::uint32_t idx = ready.top();
      ready.pop();
      lock.unlock();
      try {
        executor(idx);
      } catch (...) {
        lock.lock();
        if (!failure) failure = std::current_exception();
        cv.notify_all();
        return;
      }
      lock.lock();
      completion.push_back(idx);
      ++done;
      for (std::uint32_t d : graph.dependents[idx]) {
        if (--pending[d] == 0) ready.push(d);
      }
      cv.notify_all();
      if (done == n) return;
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      raise(Errc::ExecutorFailed, e.what());
    }
  }
  return completion;
}

}  // namespace dgstream
