#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace deepsom {

/// Fixed-size worker pool running index-parallel loops. A pool of one
/// thread runs everything inline on the caller.
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t threads);
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  std::size_t size() const { return workers_.size() + 1; }

  /// Calls fn(i) for every i in [0, n) and blocks until all calls return.
  /// Work items must not touch shared mutable state.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

 private:
  void worker_loop();
  void drain();

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t job_size_ = 0;
  std::size_t next_index_ = 0;
  std::size_t in_flight_ = 0;
  std::size_t generation_ = 0;
  bool stopping_ = false;
};

/// Worker count from DEEPSOM_THREADS (0 or unset = hardware concurrency).
std::size_t configured_thread_count();

/// Process-wide pool sized by configured_thread_count().
ThreadPool& default_pool();

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  default_pool().parallel_for(n, fn);
}

}  // namespace deepsom
