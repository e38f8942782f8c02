#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>

namespace towerlab {

// Worker count: explicit value if positive, else TOWERLAB_WORKERS, else 1.
int resolve_workers(int requested);

// Runs body(i) for i in [0, n) on `workers` OpenMP threads. Each index must
// write only its own output slot; callers merge in index order afterwards, so
// results never depend on the worker count. The first exception thrown by any
// index is rethrown on the calling thread.
template <class Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

// Splits `total` items into `parts` near-equal contiguous quotas; part i gets
// quota(total, parts, i) items.
inline std::uint64_t quota(std::uint64_t total, std::uint64_t parts, std::uint64_t i) {
  const auto lo = static_cast<std::uint64_t>((static_cast<unsigned __int128>(total) * i) / parts);
  const auto hi = static_cast<std::uint64_t>((static_cast<unsigned __int128>(total) * (i + 1)) / parts);
  return hi - lo;
}

}  // namespace towerlab
