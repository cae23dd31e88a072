// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace autosize {

/// Fixed set of threads executing blocking parallel-for calls.
///
/// `run(count, fn)` splits [0, count) into one contiguous chunk per worker and
/// returns once every chunk has finished. The calling thread executes chunk 0,
/// so a pool of one worker spawns no threads at all. Calls from different
/// threads are serialized.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t workers() const { return workers_; }

  void run(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn);

 private:
  void worker_loop(std::size_t index);

  std::size_t workers_;
  std::vector<std::thread> threads_;

  std::mutex call_mutex_;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t, std::size_t)>* job_ = nullptr;
  std::size_t job_count_ = 0;
  std::size_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stopping_ = false;
};

/// Process-wide pool with the given worker count, created on first use.
WorkerPool& shared_pool(std::size_t workers);

}  // namespace autosize
