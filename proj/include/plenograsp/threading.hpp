#pragma once

#include <cstdint>
#include <thread>
#include <vector>

namespace plenograsp {

inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

// Splits [0, total) into one contiguous chunk per worker and runs
// fn(worker_index, begin, end) on each. Chunk boundaries depend only on
// `total` and `workers`, and chunks are disjoint, so any computation whose
// outputs are written element-wise is independent of the worker count.
template <typename Fn>
void parallel_chunks(int64_t total, int workers, Fn&& fn) {
  workers = resolve_workers(workers);
  if (total <= 0) return;
  if (workers <= 1 || total == 1) {
    fn(0, int64_t(0), total);
    return;
  }
  const int n = int(std::min<int64_t>(workers, total));
  std::vector<std::thread> pool;
  pool.reserve(size_t(n));
  const int64_t chunk = (total + n - 1) / n;
  for (int w = 0; w < n; ++w) {
    const int64_t begin = int64_t(w) * chunk;
    const int64_t end = std::min(total, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace plenograsp
