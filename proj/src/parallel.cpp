#include "bustt/parallel.hpp"

#include <omp.h>

#include <exception>
#include <thread>
#include <vector>

namespace bustt {

int default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

void for_each_index_serial(std::size_t n, const std::function<void(std::size_t)>& fn) {
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

void for_each_index_omp(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 0) jobs = default_jobs();
  const auto count = static_cast<std::int64_t>(n);
  std::exception_ptr first_error = nullptr;
#pragma omp parallel for schedule(static) num_threads(jobs)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      // Exceptions must not escape the parallel region; rethrow the first below.
#pragma omp critical(bustt_for_each_error)
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

double pairwise_sum(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (const double v : values) s += v;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace bustt
