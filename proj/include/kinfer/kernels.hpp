#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <span>

#include "kinfer/expr.hpp"

namespace kinfer {

/// Execution policy for the data-parallel loops. Serial is the reference
/// implementation; Parallel must produce bit-identical results.
enum class Exec { Serial, Parallel };

/// Caps the number of worker threads (0 leaves the runtime default).
void set_thread_count(std::size_t n);
std::size_t thread_count();

namespace kernels {

/// Calls f(i) for i in [0, n) in index order.
template <class F>
void for_each_index_serial(std::size_t n, F&& f)
{
    for (std::size_t i = 0; i < n; ++i)
        f(i);
}

/// Calls f(i) for i in [0, n) across OpenMP threads. f must only write
/// state owned by index i. The first exception thrown by any f(i) is
/// rethrown after the loop.
template <class F>
void for_each_index_parallel(std::size_t n, F&& f)
{
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            f(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error)
                error = std::current_exception();
        }
    }
    if (error)
        std::rethrow_exception(error);
}

template <class F>
void for_each_index(Exec exec, std::size_t n, F&& f)
{
    if (exec == Exec::Parallel && n > 1)
        for_each_index_parallel(n, f);
    else
        for_each_index_serial(n, f);
}

/// Row-wise expression evaluation, serial reference.
void evaluate_rows_serial(const Expr& e, std::span<const std::span<const double>> columns,
                          std::span<const double> params, std::span<double> out);

/// Row-wise expression evaluation split into row blocks across threads.
void evaluate_rows_parallel(const Expr& e, std::span<const std::span<const double>> columns,
                            std::span<const double> params, std::span<double> out);

}  // namespace kernels
}  // namespace kinfer
