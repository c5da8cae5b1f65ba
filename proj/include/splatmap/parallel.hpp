#pragma once

#include <cstdint>
#include <functional>

namespace splatmap {

// Process-wide worker pool. Work items are claimed atomically, so the
// execution order is unspecified; callers that need deterministic results
// must write to disjoint outputs and merge in a fixed order afterwards.
class ThreadPool {
 public:
  static ThreadPool& instance();

  // Resizes the pool. Must not be called from inside a parallel region.
  void set_threads(int n);
  int threads() const;

  // Runs fn(i) for every i in [begin, end) and blocks until all are done.
  // Nested calls from a worker thread run inline on the caller.
  void parallel_for(std::int64_t begin, std::int64_t end,
                    const std::function<void(std::int64_t)>& fn);

  ~ThreadPool();

 private:
  ThreadPool();
  struct Impl;
  Impl* impl_;
};

inline void set_thread_count(int n) { ThreadPool::instance().set_threads(n); }
inline int thread_count() { return ThreadPool::instance().threads(); }
inline void parallel_for(std::int64_t begin, std::int64_t end,
                         const std::function<void(std::int64_t)>& fn) {
  ThreadPool::instance().parallel_for(begin, end, fn);
}

}  // namespace splatmap
