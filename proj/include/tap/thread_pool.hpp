#pragma once

#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace tap::stream {

// Fixed-size worker pool. Tasks are submitted in batches; run_all blocks the
// caller until every task in the batch has executed exactly once, then
// rethrows the first task exception if any. Tasks must not call back into
// run_all on the same pool.
class ThreadPool {
 public:
  explicit ThreadPool(size_t worker_count) {
    if (worker_count < 1) throw std::invalid_argument("worker count must be >= 1");
    workers_.reserve(worker_count);
    for (size_t i = 0; i < worker_count; ++i)
      workers_.emplace_back([this] { worker_loop(); });
  }

  ~ThreadPool() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  size_t size() const { return workers_.size(); }

  void run_all(std::vector<std::function<void()>> tasks) {
    if (tasks.empty()) return;
    Batch batch;
    batch.remaining = tasks.size();
    {
      std::lock_guard lock(mu_);
      for (auto& t : tasks) queue_.push_back(Item{std::move(t), &batch});
    }
    cv_.notify_all();
    std::unique_lock lock(batch.mu);
    batch.done.wait(lock, [&] { return batch.remaining == 0; });
    if (batch.error) std::rethrow_exception(batch.error);
  }

 private:
  struct Batch {
    std::mutex mu;
    std::condition_variable done;
    size_t remaining = 0;
    std::exception_ptr error;
  };
  struct Item {
    std::function<void()> fn;
    Batch* batch = nullptr;
  };

  void worker_loop() {
    for (;;) {
      Item item;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) return;  // stopping
        item = std::move(queue_.front());
        queue_.pop_front();
      }
      std::exception_ptr err;
      try {
        item.fn();
      } catch (...) {
        err = std::current_exception();
      }
      {
        std::lock_guard lock(item.batch->mu);
        if (err && !item.batch->error) item.batch->error = err;
        if (--item.batch->remaining == 0) item.batch->done.notify_all();
      }
    }
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Item> queue_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace tap::stream
