#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace malfuse::detail {

// Fixed set of helper threads that split an index range into contiguous
// chunks, one per worker. Chunk boundaries depend only on the item count and
// the worker count, never on scheduling.
class WorkerPool {
 public:
  using Task = std::function<void(std::size_t begin, std::size_t end)>;

  explicit WorkerPool(int num_workers) : num_workers_(num_workers < 1 ? 1 : num_workers) {
    for (int w = 1; w < num_workers_; ++w) {
      threads_.emplace_back([this, w] { loop(w); });
    }
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int size() const { return num_workers_; }

  void run(std::size_t n_items, const Task& task) {
    if (num_workers_ == 1 || n_items < 2) {
      task(0, n_items);
      return;
    }
    {
      std::lock_guard lock(mu_);
      task_ = &task;
      n_items_ = n_items;
      pending_ = num_workers_ - 1;
      error_ = nullptr;
      ++generation_;
    }
    wake_.notify_all();
    std::exception_ptr local;
    try {
      run_chunk(0, task, n_items);
    } catch (...) {
      local = std::current_exception();
    }
    std::unique_lock lock(mu_);
    done_.wait(lock, [this] { return pending_ == 0; });
    task_ = nullptr;
    if (local) std::rethrow_exception(local);
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void run_chunk(int w, const Task& task, std::size_t n) const {
    const std::size_t begin = n * static_cast<std::size_t>(w) / num_workers_;
    const std::size_t end = n * static_cast<std::size_t>(w + 1) / num_workers_;
    if (begin < end) task(begin, end);
  }

  void loop(int w) {
    std::size_t seen = 0;
    while (true) {
      const Task* task = nullptr;
      std::size_t n = 0;
      {
        std::unique_lock lock(mu_);
        wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        task = task_;
        n = n_items_;
      }
      std::exception_ptr err;
      try {
        run_chunk(w, *task, n);
      } catch (...) {
        err = std::current_exception();
      }
      {
        std::lock_guard lock(mu_);
        if (err && !error_) error_ = err;
        if (--pending_ == 0) done_.notify_one();
      }
    }
  }

  int num_workers_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const Task* task_ = nullptr;
  std::size_t n_items_ = 0;
  int pending_ = 0;
  std::size_t generation_ = 0;
  std::exception_ptr error_;
  bool stop_ = false;
};

}  // namespace malfuse::detail
