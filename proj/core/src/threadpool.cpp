#include "wldm/common.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace wldm {

namespace {

bool g_checked = false;
int g_threads = 0;  // 0 = not yet initialized

/// Long-lived pool; workers sleep between parallel_for calls. Work is handed
/// out as precomputed [begin, end) chunks so the split never depends on
/// scheduling order.
class Pool {
 public:
  explicit Pool(int workers) {
    for (int i = 0; i < workers; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run(const std::vector<std::pair<int64_t, int64_t>>& chunks,
           const std::function<void(int64_t, int64_t)>& fn) {
    {
      std::lock_guard<std::mutex> lk(mu_);
      chunks_ = &chunks;
      fn_ = &fn;
      next_ = 0;
      pending_ = static_cast<int>(chunks.size());
    }
    cv_.notify_all();
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    chunks_ = nullptr;
    fn_ = nullptr;
  }

 private:
  void worker_loop() {
    for (;;) {
      std::pair<int64_t, int64_t> chunk;
      const std::function<void(int64_t, int64_t)>* fn;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [this] { return stop_ || (chunks_ && next_ < chunks_->size()); });
        if (stop_) return;
        chunk = (*chunks_)[next_++];
        fn = fn_;
      }
      (*fn)(chunk.first, chunk.second);
      {
        std::lock_guard<std::mutex> lk(mu_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::vector<std::pair<int64_t, int64_t>>* chunks_ = nullptr;
  const std::function<void(int64_t, int64_t)>* fn_ = nullptr;
  size_t next_ = 0;
  int pending_ = 0;
  bool stop_ = false;
};

Pool* pool_instance(int workers) {
  static Pool* pool = new Pool(workers);
  return pool;
}

}  // namespace

bool checked_mode() { return g_checked; }
void set_checked_mode(bool on) { g_checked = on; }

int thread_count() {
  if (g_threads == 0) {
    unsigned hc = std::thread::hardware_concurrency();
    g_threads = hc == 0 ? 1 : static_cast<int>(hc);
  }
  return g_threads;
}

void set_thread_count(int n) {
  WLDM_CHECK(n >= 1, "thread count must be >= 1");
  g_threads = n;
}

namespace {

void run_chunked(int64_t n, int64_t chunk, int workers,
                 const std::function<void(int64_t, int64_t)>& fn) {
  int64_t nchunks = (n + chunk - 1) / chunk;
  std::vector<std::pair<int64_t, int64_t>> chunks;
  chunks.reserve(static_cast<size_t>(nchunks));
  for (int64_t c = 0; c < nchunks; ++c) {
    chunks.emplace_back(c * chunk, std::min(n, (c + 1) * chunk));
  }
  pool_instance(workers)->run(chunks, fn);
}

}  // namespace

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  int workers = thread_count();
  // Small flat loops are cheaper inline than through the pool.
  if (workers <= 1 || n < 4096) {
    fn(0, n);
    return;
  }
  run_chunked(n, 8192, workers, fn);
}

void parallel_for_rows(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  int workers = thread_count();
  if (workers <= 1 || n == 1) {
    fn(0, n);
    return;
  }
  // Aim for a few chunks per worker so uneven rows balance out.
  int64_t target = static_cast<int64_t>(workers) * 4;
  int64_t chunk = std::max<int64_t>(1, (n + target - 1) / target);
  run_chunked(n, chunk, workers, fn);
}

}  // namespace wldm
