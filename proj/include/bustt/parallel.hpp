#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace bustt {

/// Number of worker threads to use when `jobs <= 0` (logical cores).
int default_jobs();

// Runs fn(i) for i in [0, n). Every iteration writes only to its own output
// slot, so the OpenMP path and the serial path produce identical bytes; the
// serial reference is kept as the comparison baseline for tests and the
// kernel benchmark.
void for_each_index_serial(std::size_t n, const std::function<void(std::size_t)>& fn);
void for_each_index_omp(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Dispatches to the serial path when jobs == 1, OpenMP otherwise.
inline void for_each_index(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs == 1) {
    for_each_index_serial(n, fn);
  } else {
    for_each_index_omp(n, jobs, fn);
  }
}

/// Pairwise tree sum; fixed association, so results do not depend on chunking.
double pairwise_sum(std::span<const double> values);

}  // namespace bustt
