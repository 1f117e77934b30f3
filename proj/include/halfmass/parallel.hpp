#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace halfmass {

/// Runs body(i) for i in [0, count) across OpenMP threads. The first
/// exception thrown by any iteration is rethrown on the calling thread.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  std::exception_ptr error;
  std::mutex guard;
  const long long n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < n; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace halfmass
