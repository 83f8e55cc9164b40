#pragma once

#include <cstddef>
#include <exception>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace saddlelab {

/// Serial is the reference path; Parallel fans the same body out over OpenMP
/// threads. Both must produce identical results.
enum class execution { serial, parallel };

inline int worker_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_worker_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

/// Calls body(i) for i in [0, n). Each call must only write to its own slot.
/// If several calls throw, the exception of the lowest index is rethrown so
/// failures are reproducible too.
template <class Body>
void for_each_index(std::size_t n, Body&& body, execution exec = execution::parallel) {
  if (exec == execution::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::size_t failed_at = std::numeric_limits<std::size_t>::max();
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(saddlelab_for_each_index)
      {
        if (static_cast<std::size_t>(i) < failed_at) {
          failed_at = static_cast<std::size_t>(i);
          failure = std::current_exception();
        }
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace saddlelab
