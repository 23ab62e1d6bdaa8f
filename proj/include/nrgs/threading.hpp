#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace nrgs {

/// Runs fn(i) for i in [begin, end) on up to `threads` workers, each worker
/// taking one contiguous chunk. With threads <= 1 this is a plain loop, so
/// single-threaded runs have no scheduling nondeterminism at all.
template <typename Fn>
void parallelFor(int begin, int end, int threads, Fn&& fn) {
  const int count = end - begin;
  if (count <= 0) return;
  threads = std::clamp(threads, 1, count);
  if (threads == 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const int chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = begin + t * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace nrgs
