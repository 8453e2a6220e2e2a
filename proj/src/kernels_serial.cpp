#include <algorithm>
#include <cmath>

#include "memfuse/kernels.hpp"

namespace memfuse::kernels::serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
    for (std::size_t i = 0; i < d.m; ++i) {
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
    for (std::size_t i = 0; i < d.m; ++i) {
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
    for (std::size_t i = 0; i < d.m; ++i) {
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
    for (std::size_t r = 0; r < rows; ++r) {
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
        if (!any) return r;
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
    return rows;
}

}  // namespace memfuse::kernels::serial
