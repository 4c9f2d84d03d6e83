#include "rcmlab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace rcmlab {

namespace {
std::atomic<int> g_threads{0};

int default_threads() {
  if (const char* env = std::getenv("RCMLAB_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}
}  // namespace

int configured_threads() {
  int n = g_threads.load(std::memory_order_relaxed);
  if (n == 0) {
    n = default_threads();
    g_threads.store(n, std::memory_order_relaxed);
  }
  return n;
}

void set_threads(int n) { g_threads.store(std::max(1, n), std::memory_order_relaxed); }

void parallel_for(int64_t begin, int64_t end,
                  const std::function<void(int64_t)>& fn) {
  int64_t n = end - begin;
  if (n <= 0) return;
  int workers = std::min<int64_t>(configured_threads(), n);
  if (workers <= 1) {
    for (int64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    int64_t lo = begin + w * chunk;
    int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn]() {
      for (int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

void parallel_chunks(int64_t n, int64_t grain,
                     const std::function<void(int64_t, int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  if (grain < 1) grain = 1;
  int64_t chunks = (n + grain - 1) / grain;
  parallel_for(0, chunks, [&](int64_t c) {
    int64_t lo = c * grain;
    int64_t hi = std::min(n, lo + grain);
    fn(lo, hi, c);
  });
}

namespace {
constexpr int64_t kBlock = 4096;
}

double block_sum(const double* v, int64_t n) {
  if (n == 0) return 0.0;
  int64_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks);
  parallel_for(0, blocks, [&](int64_t b) {
    int64_t lo = b * kBlock, hi = std::min(n, lo + kBlock);
    double s = 0.0;
    for (int64_t i = lo; i < hi; ++i) s += v[i];
    partial[b] = s;
  });
  double s = 0.0;
  for (int64_t b = 0; b < blocks; ++b) s += partial[b];
  return s;
}

double block_dot(const double* a, const double* b, int64_t n) {
  if (n == 0) return 0.0;
  int64_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks);
  parallel_for(0, blocks, [&](int64_t blk) {
    int64_t lo = blk * kBlock, hi = std::min(n, lo + kBlock);
    double s = 0.0;
    for (int64_t i = lo; i < hi; ++i) s += a[i] * b[i];
    partial[blk] = s;
  });
  double s = 0.0;
  for (int64_t blk = 0; blk < blocks; ++blk) s += partial[blk];
  return s;
}

}  // namespace rcmlab
