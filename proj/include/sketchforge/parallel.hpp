#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace sketchforge {

inline unsigned default_worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// Splits [0, n) into contiguous chunks and runs fn(begin, end) on a pool of
// workers, joining before return. Chunks must write to disjoint memory.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn, unsigned workers = 0) {
  if (workers == 0) workers = default_worker_count();
  workers = static_cast<unsigned>(std::min<size_t>(workers, n));
  if (workers <= 1) {
    if (n > 0) fn(size_t{0}, n);
    return;
  }
  const size_t chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const size_t b = w * chunk;
    const size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
}

}  // namespace sketchforge
