#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace splatcull {

/// Process-wide default worker count used when a caller passes 0.
void set_default_threads(int threads);
int default_threads();

/// Maps a requested thread count (0 = default) to a positive count.
int resolve_threads(int requested);

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries
/// depend only on n and the thread count; callers that need thread-count
/// independent results must make per-index work independent.
template <typename Fn>
void parallel_for_chunks(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(resolve_threads(threads)), n);
  if (workers <= 1) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  const std::size_t step = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * step;
    const std::size_t end = std::min(n, begin + step);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(std::size_t{0}, std::min(n, step));
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  parallel_for_chunks(n, threads, [&fn](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace splatcull
