#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace specmc {

/// Number of worker threads used when a caller passes 0.
inline int default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// Splits [0, count) into `threads` contiguous chunks, runs `body(begin, end, chunk)`
/// on each, and returns the per-chunk results in chunk order. The chunking depends only
/// on (count, threads), so reductions over the returned vector are reproducible. The
/// first exception thrown by a chunk, in chunk order, is rethrown after all chunks finish.
template <class Result, class Body>
std::vector<Result> parallel_chunks(std::size_t count, int threads, Body&& body) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count));
  std::vector<Result> results(workers);
  if (workers == 1) {
    results[0] = body(std::size_t{0}, count, std::size_t{0});
    return results;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  const std::size_t base = count / workers;
  const std::size_t extra = count % workers;
  std::size_t begin = 0;
  std::vector<std::size_t> bounds(workers + 1);
  for (std::size_t w = 0; w < workers; ++w) {
    bounds[w] = begin;
    begin += base + (w < extra ? 1 : 0);
  }
  bounds[workers] = count;
  std::vector<std::exception_ptr> errors(workers);
  auto run = [&](std::size_t w) {
    try {
      results[w] = body(bounds[w], bounds[w + 1], w);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace specmc
