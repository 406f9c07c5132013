#include "deepsom/parallel.hpp"

#include <cstdlib>
#include <exception>
#include <string>

namespace deepsom {
namespace {
thread_local bool t_inside_job = false;

// Marks the current thread as running pool work for the scope's lifetime.
struct JobScope {
  bool previous;
  JobScope() : previous(t_inside_job) { t_inside_job = true; }
  ~JobScope() { t_inside_job = previous; }
};
}  // namespace

ThreadPool::ThreadPool(std::size_t threads) {
  if (threads == 0) threads = 1;
  workers_.reserve(threads - 1);
  for (std::size_t i = 1; i < threads; ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& w : workers_) w.join();
}

void ThreadPool::drain() {
  // Caller holds no lock. Pulls indices until the current job is exhausted.
  while (true) {
    std::size_t index;
    const std::function<void(std::size_t)>* job;
    {
      std::lock_guard lock(mutex_);
      if (job_ == nullptr || next_index_ >= job_size_) return;
      index = next_index_++;
      ++in_flight_;
      job = job_;
    }
    {
      JobScope scope;
      (*job)(index);
    }
    {
      std::lock_guard lock(mutex_);
      --in_flight_;
      if (next_index_ >= job_size_ && in_flight_ == 0) done_.notify_all();
    }
  }
}

void ThreadPool::worker_loop() {
  std::size_t seen = 0;
  while (true) {
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
    }
    drain();
  }
}

void ThreadPool::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  // Nested loops run inline on the calling worker.
  if (workers_.empty() || n == 1 || t_inside_job) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  const std::function<void(std::size_t)> guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  {
    std::lock_guard lock(mutex_);
    job_ = &guarded;
    job_size_ = n;
    next_index_ = 0;
    in_flight_ = 0;
    ++generation_;
  }
  wake_.notify_all();
  drain();
  {
    std::unique_lock lock(mutex_);
    done_.wait(lock, [&] { return next_index_ >= job_size_ && in_flight_ == 0; });
    job_ = nullptr;
  }
  if (failure) std::rethrow_exception(failure);
}

std::size_t configured_thread_count() {
  if (const char* env = std::getenv("DEEPSOM_THREADS")) {
    try {
      const auto requested = std::stoul(env);
      if (requested > 0) return requested;
    } catch (const std::exception&) {
      // fall through to auto
    }
  }
  const auto hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

ThreadPool& default_pool() {
  static ThreadPool pool(configured_thread_count());
  return pool;
}

}  // namespace deepsom
