#include "lf/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

#include "lf/rng.hpp"

namespace lf {

std::uint64_t global_seed() {
  static const std::uint64_t seed = [] {
    const char* s = std::getenv("LF_SEED");
    return s ? std::strtoull(s, nullptr, 10) : 0ULL;
  }();
  return seed;
}

int worker_count() {
  static const int n = [] {
    const char* s = std::getenv("LF_THREADS");
    if (!s) return 1;
    long v = std::strtol(s, nullptr, 10);
    if (v < 1) v = 1;
    if (v > 256) v = 256;
    return static_cast<int>(v);
  }();
  return n;
}

namespace {

thread_local bool in_worker = false;

// Persistent pool; workers park on a condition variable between jobs.
class Pool {
 public:
  explicit Pool(int workers) : workers_(workers) {
    for (int w = 1; w < workers_; ++w) {
      threads_.emplace_back([this, w] { worker_loop(w); });
    }
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run(std::size_t count,
           const std::function<void(std::size_t, std::size_t)>& body) {
    {
      std::lock_guard<std::mutex> lk(mu_);
      count_ = count;
      body_ = &body;
      pending_ = workers_ - 1;
      ++generation_;
    }
    cv_.notify_all();
    run_span(0, count, body);
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    body_ = nullptr;
  }

 private:
  void worker_loop(int index) {
    in_worker = true;
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t, std::size_t)>* body;
      std::size_t count;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        body = body_;
        count = count_;
      }
      run_span(index, count, *body);
      {
        std::lock_guard<std::mutex> lk(mu_);
        if (--pending_ == 0) done_cv_.notify_one();
      }
    }
  }

  void run_span(int index, std::size_t count,
                const std::function<void(std::size_t, std::size_t)>& body) {
    const std::size_t per = (count + workers_ - 1) / workers_;
    const std::size_t begin = std::min(count, per * static_cast<std::size_t>(index));
    const std::size_t end = std::min(count, begin + per);
    if (begin < end) body(begin, end);
  }

  const int workers_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t, std::size_t)>* body_ = nullptr;
  std::size_t count_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace

void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (count == 0) return;
  const int workers = worker_count();
  if (workers == 1 || in_worker || count < 2) {
    body(0, count);
    return;
  }
  static Pool pool(worker_count());
  pool.run(count, body);
}

}  // namespace lf
