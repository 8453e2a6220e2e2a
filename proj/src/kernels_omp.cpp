#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "memfuse/kernels.hpp"

namespace memfuse::kernels {

namespace omp {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
    const auto m = static_cast<std::ptrdiff_t>(d.m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < m; ++i) {
        double* crow = c.data() + i * d.n;
        std::fill(crow, crow + d.n, 0.0);
        for (std::size_t p = 0; p < d.k; ++p) {
            const double aip = a[i * d.k + p];
            const double* brow = b.data() + p * d.n;
            for (std::size_t j = 0; j < d.n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
    const auto m = static_cast<std::ptrdiff_t>(d.m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * d.k;
        for (std::size_t j = 0; j < d.n; ++j) {
            const double* brow = b.data() + j * d.k;
            double acc = 0.0;
            for (std::size_t p = 0; p < d.k; ++p) acc += arow[p] * brow[p];
            c[i * d.n + j] = acc;
        }
    }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
    const auto m = static_cast<std::ptrdiff_t>(d.m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < m; ++i) {
        double* crow = c.data() + i * d.n;
        std::fill(crow, crow + d.n, 0.0);
        for (std::size_t p = 0; p < d.k; ++p) {
            const double api = a[p * d.m + i];
            const double* brow = b.data() + p * d.n;
            for (std::size_t j = 0; j < d.n; ++j) crow[j] += api * brow[j];
        }
    }
}

std::size_t masked_softmax_rows(std::span<const double> logits, std::span<const std::uint8_t> mask,
                                std::span<double> out, std::size_t rows, std::size_t cols) {
    const bool use_mask = !mask.empty();
    const auto n = static_cast<std::ptrdiff_t>(rows);
    std::size_t first_bad = rows;
#pragma omp parallel for schedule(static) reduction(min : first_bad)
    for (std::ptrdiff_t r = 0; r < n; ++r) {
        const double* z = logits.data() + r * cols;
        const std::uint8_t* m = use_mask ? mask.data() + r * cols : nullptr;
        double* y = out.data() + r * cols;
        double peak = -INFINITY;
        bool any = false;
        for (std::size_t j = 0; j < cols; ++j) {
            if (m && !m[j]) continue;
            any = true;
            peak = std::max(peak, z[j]);
        }
        if (!any) {
            first_bad = std::min(first_bad, static_cast<std::size_t>(r));
            continue;
        }
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            if (m && !m[j]) {
                y[j] = 0.0;
                continue;
            }
            y[j] = std::exp(z[j] - peak);
            total += y[j];
        }
        for (std::size_t j = 0; j < cols; ++j) y[j] /= total;
    }
    return first_bad;
}

}  // namespace omp

namespace {

bool go_parallel(std::size_t work) {
#ifdef _OPENMP
    return work >= kParallelThreshold && !omp_in_parallel() && omp_get_max_threads() > 1;
#else
    (void)work;
    return false;
#endif
}

}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
    if (go_parallel(d.m * d.k * d.n)) {
        omp::matmul(a, b, c, d);
    } else {
        serial::matmul(a, b, c, d);
    }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
    if (go_parallel(d.m * d.k * d.n)) {
        omp::matmul_nt(a, b, c, d);
    } else {
        serial::matmul_nt(a, b, c, d);
    }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
    if (go_parallel(d.m * d.k * d.n)) {
        omp::matmul_tn(a, b, c, d);
    } else {
        serial::matmul_tn(a, b, c, d);
    }
}

std::size_t masked_softmax_rows(std::span<const double> logits, std::span<const std::uint8_t> mask,
                                std::span<double> out, std::size_t rows, std::size_t cols) {
    if (go_parallel(rows * cols * 8)) return omp::masked_softmax_rows(logits, mask, out, rows, cols);
    return serial::masked_softmax_rows(logits, mask, out, rows, cols);
}

void apply_thread_limit_from_env() {
#ifdef _OPENMP
    if (const char* raw = std::getenv("MEMFUSE_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(raw, &end, 10);
        if (end != raw && n > 0) omp_set_num_threads(static_cast<int>(n));
    }
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace memfuse::kernels
