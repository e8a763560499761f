#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace dtstereo {

// Runs fn(begin, end) over a static partition of [0, count) into at most
// `threads` contiguous chunks. Chunks are disjoint, so callers that write
// only inside their chunk need no synchronization. threads <= 1 runs inline.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  if (count <= 0) return;
  const int workers = std::clamp(threads, 1, count);
  if (workers == 1) {
    fn(0, count);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  const int chunk = (count + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const int begin = w * chunk;
    const int end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(0, std::min(count, chunk));
}

}  // namespace dtstereo
