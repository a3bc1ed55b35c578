#include "kinfer/kernels.hpp"

#include <algorithm>
#include <vector>

#include <omp.h>

namespace kinfer {

void set_thread_count(std::size_t n)
{
    if (n > 0)
        omp_set_num_threads(static_cast<int>(n));
}

std::size_t thread_count() { return static_cast<std::size_t>(omp_get_max_threads()); }

namespace kernels {

void evaluate_rows_serial(const Expr& e, std::span<const std::span<const double>> columns,
                          std::span<const double> params, std::span<double> out)
{
    evaluate_rows(e, columns, params, out);
}

void evaluate_rows_parallel(const Expr& e, std::span<const std::span<const double>> columns,
                            std::span<const double> params, std::span<double> out)
{
    constexpr std::size_t block = 512;
    const std::size_t rows = out.size();
    const std::size_t blocks = (rows + block - 1) / block;
    for_each_index_parallel(blocks, [&](std::size_t b) {
        const std::size_t lo = b * block;
        const std::size_t len = std::min(block, rows - lo);
        std::vector<std::span<const double>> sub(columns.size());
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c].size() >= lo + len)
                sub[c] = columns[c].subspan(lo, len);
        evaluate_rows(e, sub, params, out.subspan(lo, len));
    });
}

}  // namespace kernels
}  // namespace kinfer
