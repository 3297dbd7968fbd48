#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>

#include "dgstream/errors.hpp"

namespace dgstream {

/// Single-producer single-consumer bounded hand-off queue for pipeline
/// stages. Waits carry a heartbeat timeout; a stage that makes no progress
/// for that long aborts the run instead of deadlocking silently.
template <typename T>
class BoundedQueue {
 public:
  BoundedQueue(std::size_t capacity, double timeout_s)
      : capacity_(capacity), timeout_(std::chrono::duration<double>(timeout_s)) {}

  void push(T item) {
    std::unique_lock lock(mu_);
    if (!cv_space_.wait_for(lock, timeout_, [&] { return items_.size() < capacity_ || closed_; })) {
      raise(Errc::PipelineStalled, "stage output queue full past heartbeat timeout");
    }
    if (closed_) raise(Errc::PipelineStalled, "queue closed");
    items_.push_back(std::move(item));
    cv_items_.notify_one();
  }

  /// Empty optional means the producer closed the queue and it drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    if (!cv_items_.wait_for(lock, timeout_, [&] { return !items_.empty() || closed_; })) {
      raise(Errc::PipelineStalled, "stage input queue empty past heartbeat timeout");
    }
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    cv_space_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_items_.notify_all();
    cv_space_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::chrono::duration<double> timeout_;
  std::mutex mu_;
  std::condition_variable cv_items_, cv_space_;
  std::deque<T> items_;
  bool closed_ = false;
};

}  // namespace dgstream
