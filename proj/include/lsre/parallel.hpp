#pragma once

#include <cstddef>
#include <exception>
#include <utility>

#include <omp.h>

namespace lsre::par {

// Serial reference loop. Kept alongside the OpenMP kernel so tests and the
// benchmark tool can compare the two paths on identical work items.
template <typename Fn>
void run_serial(std::size_t n, Fn&& fn) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

// OpenMP kernel. Work items must be independent and write only their own
// slot; the first exception thrown by any item is rethrown after the loop.
template <typename Fn>
void run_openmp(std::size_t n, int workers, Fn&& fn) {
    std::exception_ptr first_error = nullptr;
#pragma omp parallel for num_threads(workers) schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(lsre_par_error)
            {
                if (!first_error) first_error = std::current_exception();
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

// Dispatch: workers <= 1 selects the serial reference path.
template <typename Fn>
void for_each_index(std::size_t n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        run_serial(n, std::forward<Fn>(fn));
    } else {
        run_openmp(n, workers, std::forward<Fn>(fn));
    }
}

inline void enable_nested(int levels = 2) { omp_set_max_active_levels(levels); }

}  // namespace lsre::par
