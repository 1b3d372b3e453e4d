#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace splatsdf {

// Minimal persistent worker pool. parallel_for splits [0, n) into one
// contiguous block per worker; results that depend on summation order must be
// merged by the caller in worker-index order so a run is reproducible for a
// fixed worker count.
class ThreadPool {
 public:
  explicit ThreadPool(int workers = 0) {
    if (workers <= 0) workers = int(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers_ = workers;
    for (int t = 1; t < workers_; ++t) {
      threads_.emplace_back([this, t] { worker_loop(t); });
    }
  }

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lk(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& th : threads_) th.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int workers() const { return workers_; }

  // fn(worker_index, begin, end)
  void parallel_for(std::int64_t n, const std::function<void(int, std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    const int used = int(std::min<std::int64_t>(workers_, n));
    if (used == 1) {
      fn(0, 0, n);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(mutex_);
      job_ = &fn;
      job_n_ = n;
      job_workers_ = used;
      pending_ = used - 1;
      ++generation_;
    }
    cv_.notify_all();
    run_block(0, used, n, fn);
    std::unique_lock<std::mutex> lk(mutex_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

  static ThreadPool& global() {
    auto& p = global_ptr();
    if (!p) p = std::make_unique<ThreadPool>();
    return *p;
  }

  // Rebuilds the global pool with the given size. Call before any parallel
  // work is in flight (CLI startup, test setup).
  static void set_global_workers(int workers) {
    global_ptr() = std::make_unique<ThreadPool>(workers);
  }

 private:
  static std::unique_ptr<ThreadPool>& global_ptr() {
    static std::unique_ptr<ThreadPool> pool;
    return pool;
  }

  static void run_block(int worker, int used, std::int64_t n,
                        const std::function<void(int, std::int64_t, std::int64_t)>& fn) {
    const std::int64_t b = n * worker / used;
    const std::int64_t e = n * (worker + 1) / used;
    if (b < e) fn(worker, b, e);
  }

  void worker_loop(int worker) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int, std::int64_t, std::int64_t)>* job = nullptr;
      std::int64_t n = 0;
      int used = 0;
      {
        std::unique_lock<std::mutex> lk(mutex_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = job_;
        n = job_n_;
        used = job_workers_;
      }
      if (job && worker < used) run_block(worker, used, n, *job);
      {
        std::lock_guard<std::mutex> lk(mutex_);
        if (worker < used && --pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  int workers_ = 1;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int, std::int64_t, std::int64_t)>* job_ = nullptr;
  std::int64_t job_n_ = 0;
  int job_workers_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

// Convenience element-wise wrapper.
inline void parallel_for_each(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  ThreadPool::global().parallel_for(n, [&](int, std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) fn(i);
  });
}

}  // namespace splatsdf
