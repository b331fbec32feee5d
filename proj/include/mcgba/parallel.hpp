// Minimal deterministic parallel helpers over contiguous index ranges.
#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace mcgba {

// Runs fn(begin, end) over a partition of [0, count) into at most
// num_threads contiguous slabs. Each index is handled exactly once, so as
// long as fn writes disjoint outputs the result is independent of the
// number of threads.
template <class Fn>
void parallel_for_range(std::int64_t count, int num_threads, const Fn& fn) {
  if (count <= 0) return;
  num_threads = std::max(1, num_threads);
  if (num_threads == 1 || count < 2 * num_threads) {
    fn(std::int64_t{0}, count);
    return;
  }
  const std::int64_t chunk = (count + num_threads - 1) / num_threads;
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(num_threads);
  workers.reserve(num_threads);
  for (int t = 0; t < num_threads; ++t) {
    const std::int64_t begin = t * chunk;
    const std::int64_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&, t, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Deterministic blocked reduction: partial sums are formed per fixed-size
// block (serial within each block) and combined in block order, so the
// result does not depend on the thread count.
template <class Term>
double blocked_sum(std::int64_t count, int num_threads, const Term& term) {
  constexpr std::int64_t kBlock = 1024;
  if (count <= 0) return 0.0;
  const std::int64_t num_blocks = (count + kBlock - 1) / kBlock;
  std::vector<double> partial(num_blocks, 0.0);
  parallel_for_range(num_blocks, num_threads,
                     [&](std::int64_t bbegin, std::int64_t bend) {
                       for (std::int64_t b = bbegin; b < bend; ++b) {
                         const std::int64_t lo = b * kBlock;
                         const std::int64_t hi = std::min(count, lo + kBlock);
                         double acc = 0.0;
                         for (std::int64_t i = lo; i < hi; ++i) acc += term(i);
                         partial[b] = acc;
                       }
                     });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace mcgba
