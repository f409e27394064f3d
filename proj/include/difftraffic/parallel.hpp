#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace difftraffic {

inline void set_thread_count(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace detail {

// Exceptions may not leave an OpenMP region. The one thrown at the lowest
// index is kept and rethrown, so the reported error does not depend on
// scheduling.
class FirstError {
 public:
  void record(std::size_t index, std::exception_ptr error) {
    std::lock_guard lock(mutex_);
    if (index < index_) {
      index_ = index;
      error_ = std::move(error);
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mutex_;
  std::size_t index_ = std::numeric_limits<std::size_t>::max();
  std::exception_ptr error_;
};

}  // namespace detail

// Static partition of [0, n). Each index is visited by exactly one worker, so
// bodies that write only to slot i give results independent of thread count.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const auto count = static_cast<std::int64_t>(n);
  detail::FirstError first;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (count > 1024)
#endif
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      first.record(static_cast<std::size_t>(i), std::current_exception());
    }
  }
  first.rethrow();
}

// Dynamic schedule for coarse, uneven tasks (one trajectory fit per index).
template <typename Body>
void parallel_for_tasks(std::size_t n, Body&& body) {
  const auto count = static_cast<std::int64_t>(n);
  detail::FirstError first;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      first.record(static_cast<std::size_t>(i), std::current_exception());
    }
  }
  first.rethrow();
}

}  // namespace difftraffic
