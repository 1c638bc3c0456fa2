#pragma once

// Thread-count control and a deterministic blocked reduction: work is cut
// into fixed-size blocks independent of the thread count, partial results are
// merged in block order.

#include <cstdint>
#include <vector>

namespace chowla {

/// Caps OpenMP worker threads; n <= 0 restores machine parallelism.
void set_thread_limit(int n);
int thread_limit();

inline constexpr std::uint64_t kReduceBlock = 4096;

template <class T, class BlockFn>
T blocked_reduce(std::uint64_t n, T init, BlockFn&& block_fn) {
  const std::uint64_t blocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<T> partial(blocks, T{});
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < static_cast<std::int64_t>(blocks); ++b) {
    const std::uint64_t lo = static_cast<std::uint64_t>(b) * kReduceBlock;
    const std::uint64_t hi = lo + kReduceBlock < n ? lo + kReduceBlock : n;
    partial[b] = block_fn(lo, hi);
  }
  T acc = init;
  for (const T& p : partial) acc += p;
  return acc;
}

}  // namespace chowla
