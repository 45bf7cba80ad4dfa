#pragma once

// Chunked execution with reproducible reductions.
//
// Work is split into fixed-size path chunks. Reductions accumulate chunks
// into a fixed number of slots (chunk c goes to slot c % slots, visited in
// increasing c) and slots are merged in index order, so the floating-point
// result depends on the chunk size but never on the worker count.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dualhedge {

struct Execution {
  std::size_t workers = 1;
  std::size_t chunk_size = 16384;

  static Execution hardware() {
    Execution e;
    e.workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    return e;
  }
};

struct ChunkRange {
  std::size_t begin;
  std::size_t end;
  std::size_t size() const { return end - begin; }
};

inline std::size_t chunk_count(std::size_t items, std::size_t chunk_size) {
  return chunk_size == 0 ? 0 : (items + chunk_size - 1) / chunk_size;
}

inline ChunkRange chunk_range(std::size_t c, std::size_t items, std::size_t chunk_size) {
  const std::size_t b = c * chunk_size;
  return {b, std::min(items, b + chunk_size)};
}

/// Runs `task(t)` for t in [0, tasks) on up to `workers` threads.
/// The first exception thrown by any task is rethrown on the caller.
template <class Task>
void parallel_for(std::size_t tasks, std::size_t workers, Task&& task) {
  workers = std::min(std::max<std::size_t>(1, workers), tasks);
  if (workers <= 1) {
    for (std::size_t t = 0; t < tasks; ++t) task(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks) return;
      try {
        task(t);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(tasks);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

/// Runs `chunk_fn(range)` over every chunk of `items` (order unspecified).
template <class ChunkFn>
void for_each_chunk(std::size_t items, const Execution& exec, ChunkFn&& chunk_fn) {
  const std::size_t chunks = chunk_count(items, exec.chunk_size);
  parallel_for(chunks, exec.workers,
               [&](std::size_t c) { chunk_fn(chunk_range(c, items, exec.chunk_size)); });
}

inline constexpr std::size_t kReductionSlots = 32;

/// Deterministic reduction over chunks of `items`.
///
/// `make()` builds an empty accumulator, `accumulate(acc, range)` folds one
/// chunk into it and `merge(into, from)` combines two accumulators.
template <class Acc, class Make, class Accumulate, class Merge>
Acc ordered_reduce(std::size_t items, const Execution& exec, Make&& make,
                   Accumulate&& accumulate, Merge&& merge) {
  const std::size_t chunks = chunk_count(items, exec.chunk_size);
  const std::size_t slots = std::min(kReductionSlots, std::max<std::size_t>(1, chunks));
  std::vector<Acc> partial;
  partial.reserve(slots);
  for (std::size_t s = 0; s < slots; ++s) partial.push_back(make());
  parallel_for(slots, exec.workers, [&](std::size_t s) {
    for (std::size_t c = s; c < chunks; c += slots)
      accumulate(partial[s], chunk_range(c, items, exec.chunk_size));
  });
  Acc total = std::move(partial.front());
  for (std::size_t s = 1; s < slots; ++s) merge(total, partial[s]);
  return total;
}

}  // namespace dualhedge
