// SPDX-License-Identifier: Apache-2.0
#include "autosize/worker_pool.hpp"

#include <algorithm>
#include <map>
#include <memory>

namespace autosize {

namespace {

std::pair<std::size_t, std::size_t> chunk_bounds(std::size_t count, std::size_t parts, std::size_t index) {
  const std::size_t base = count / parts;
  const std::size_t extra = count % parts;
  const std::size_t begin = index * base + std::min(index, extra);
  const std::size_t end = begin + base + (index < extra ? 1 : 0);
  return {begin, end};
}

}  // namespace

WorkerPool::WorkerPool(std::size_t workers) : workers_(std::max<std::size_t>(1, workers)) {
  threads_.reserve(workers_ - 1);
  for (std::size_t i = 1; i < workers_; ++i) {
    threads_.emplace_back([this, i] { worker_loop(i); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  start_cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::run(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn) {
  if (count == 0) return;
  if (workers_ == 1 || count == 1) {
    fn(0, count);
    return;
  }
  std::lock_guard call_lock(call_mutex_);
  {
    std::lock_guard lock(mutex_);
    job_ = &fn;
    job_count_ = count;
    pending_ = workers_ - 1;
    ++generation_;
  }
  start_cv_.notify_all();

  auto [begin, end] = chunk_bounds(count, workers_, 0);
  if (begin < end) fn(begin, end);

  std::unique_lock lock(mutex_);
  done_cv_.wait(lock, [this] { return pending_ == 0; });
  job_ = nullptr;
}

void WorkerPool::worker_loop(std::size_t index) {
  std::size_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t, std::size_t)>* job = nullptr;
    std::size_t count = 0;
    {
      std::unique_lock lock(mutex_);
      start_cv_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
      job = job_;
      count = job_count_;
    }
    auto [begin, end] = chunk_bounds(count, workers_, index);
    if (begin < end) (*job)(begin, end);
    {
      std::lock_guard lock(mutex_);
      if (--pending_ == 0) done_cv_.notify_one();
    }
  }
}

WorkerPool& shared_pool(std::size_t workers) {
  static std::mutex registry_mutex;
  static std::map<std::size_t, std::unique_ptr<WorkerPool>> registry;
  workers = std::max<std::size_t>(1, workers);
  std::lock_guard lock(registry_mutex);
  auto& slot = registry[workers];
  if (!slot) slot = std::make_unique<WorkerPool>(workers);
  return *slot;
}

}  // namespace autosize
