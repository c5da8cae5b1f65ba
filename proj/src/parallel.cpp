#include "splatmap/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace splatmap {

namespace {
thread_local bool t_inside_pool = false;
}

struct ThreadPool::Impl {
  std::vector<std::thread> workers;
  std::mutex mutex;
  std::condition_variable wake;
  std::condition_variable done;

  // Current batch. Indices are claimed in grains via an atomic cursor.
  const std::function<void(std::int64_t)>* fn = nullptr;
  std::int64_t begin = 0;
  std::int64_t end = 0;
  std::int64_t grain = 1;
  std::atomic<std::int64_t> cursor{0};
  std::atomic<int> active{0};
  std::uint64_t epoch = 0;
  bool quit = false;

  void worker_loop() {
    t_inside_pool = true;
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock lock(mutex);
        wake.wait(lock, [&] { return quit || epoch != seen; });
        if (quit) return;
        seen = epoch;
      }
      run_batch();
      if (active.fetch_sub(1) == 1) {
        std::lock_guard lock(mutex);
        done.notify_all();
      }
    }
  }

  void run_batch() {
    for (;;) {
      const std::int64_t lo = cursor.fetch_add(grain);
      if (lo >= end) break;
      const std::int64_t hi = std::min(end, lo + grain);
      for (std::int64_t i = lo; i < hi; ++i) (*fn)(i);
    }
  }

  void stop() {
    {
      std::lock_guard lock(mutex);
      quit = true;
      wake.notify_all();
    }
    for (auto& w : workers) w.join();
    workers.clear();
    quit = false;
  }
};

ThreadPool::ThreadPool() : impl_(new Impl) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  set_threads(n > 0 ? n : 1);
}

ThreadPool::~ThreadPool() {
  impl_->stop();
  delete impl_;
}

ThreadPool& ThreadPool::instance() {
  static ThreadPool pool;
  return pool;
}

void ThreadPool::set_threads(int n) {
  if (n < 1) n = 1;
  impl_->stop();
  // The calling thread participates in every batch, so spawn n-1 workers.
  for (int i = 0; i + 1 < n; ++i)
    impl_->workers.emplace_back([this] { impl_->worker_loop(); });
}

int ThreadPool::threads() const {
  return static_cast<int>(impl_->workers.size()) + 1;
}

void ThreadPool::parallel_for(std::int64_t begin, std::int64_t end,
                              const std::function<void(std::int64_t)>& fn) {
  if (begin >= end) return;
  const std::int64_t count = end - begin;
  if (t_inside_pool || impl_->workers.empty() || count == 1) {
    for (std::int64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  Impl& im = *impl_;
  {
    std::lock_guard lock(im.mutex);
    im.fn = &fn;
    im.begin = begin;
    im.end = end;
    im.grain = std::max<std::int64_t>(
        1, count / (static_cast<std::int64_t>(im.workers.size() + 1) * 4));
    im.cursor.store(begin);
    im.active.store(static_cast<int>(im.workers.size()));
    ++im.epoch;
    im.wake.notify_all();
  }
  im.run_batch();
  std::unique_lock lock(im.mutex);
  im.done.wait(lock, [&] { return im.active.load() == 0; });
  im.fn = nullptr;
}

}  // namespace splatmap
