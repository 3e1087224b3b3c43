#include "npsc/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace npsc {

namespace {

int default_workers() {
  if (const char* env = std::getenv("NPSC_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int> g_workers{0};  // 0 = not yet initialized

}  // namespace

int worker_count() {
  int w = g_workers.load(std::memory_order_relaxed);
  if (w == 0) {
    w = default_workers();
    g_workers.store(w, std::memory_order_relaxed);
  }
  return w;
}

void set_worker_count(int n) { g_workers.store(std::max(1, n), std::memory_order_relaxed); }

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& body) {
  const std::size_t count = end > begin ? end - begin : 0;
  if (count == 0) return;
  const int workers = std::min<std::size_t>(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = begin; i < end; ++i) body(i);
    return;
  }
  // Contiguous static chunks; no shared mutable state beyond the user's slots.
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    const std::size_t lo = begin + chunk * static_cast<std::size_t>(t);
    const std::size_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace npsc
