#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <vector>

// Data-parallel sweep over an index range. The range is cut into fixed-size
// chunks; each chunk fills its own accumulator and the accumulators are merged
// in chunk order, so the result never depends on the worker count or on
// scheduling. sweep_serial is the single-threaded reference.
//
// Acc needs default construction and `void merge(Acc&&)`. Merging must be
// associative (append + sum), which makes one serial pass equal to the
// chunk-by-chunk merge.
namespace hiddenscan {

inline constexpr std::int64_t kSweepChunk = 4096;

inline std::int64_t sweep_chunk_count(std::int64_t count) {
  return count <= 0 ? 0 : (count + kSweepChunk - 1) / kSweepChunk;
}

template <typename Acc, typename Fn>
Acc sweep_serial(std::int64_t first, std::int64_t last, Fn&& fn) {
  Acc acc;
  for (std::int64_t i = first; i <= last; ++i) fn(i, acc);
  return acc;
}

template <typename Acc, typename Fn>
Acc sweep_parallel(std::int64_t first, std::int64_t last, int workers, Fn&& fn) {
  const std::int64_t count = last >= first ? last - first + 1 : 0;
  const std::int64_t chunks = sweep_chunk_count(count);
  if (chunks <= 1 || workers <= 1) return sweep_serial<Acc>(first, last, fn);

  std::vector<Acc> partial(static_cast<std::size_t>(chunks));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(chunks));
  const int threads = static_cast<int>(std::min<std::int64_t>(workers, chunks));

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t c = 0; c < chunks; ++c) {
    const std::int64_t lo = first + c * kSweepChunk;
    const std::int64_t hi = std::min(last, lo + kSweepChunk - 1);
    try {
      for (std::int64_t i = lo; i <= hi; ++i) fn(i, partial[static_cast<std::size_t>(c)]);
    } catch (...) {
      failures[static_cast<std::size_t>(c)] = std::current_exception();
    }
  }

  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  Acc out;
  for (auto& p : partial) out.merge(std::move(p));
  return out;
}

template <typename Acc, typename Fn>
Acc sweep(std::int64_t first, std::int64_t last, int workers, Fn&& fn) {
  return workers <= 1 ? sweep_serial<Acc>(first, last, fn) : sweep_parallel<Acc>(first, last, workers, fn);
}

}  // namespace hiddenscan
