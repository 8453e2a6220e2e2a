#pragma once

// Dense inner-loop kernels. Each kernel has a serial reference in
// `kernels::serial` and an OpenMP version in `kernels::omp`. Both accumulate
// every output element in the same order, so their results are bitwise equal;
// the tests hold them to that.

#include <cstddef>
#include <span>

#include "memfuse/tensor.hpp"

namespace memfuse::kernels {

struct MatDims {
    std::size_t m;
    std::size_t k;
    std::size_t n;
};

namespace serial {

/// c[m×n] = a[m×k] · b[k×n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
/// c[m×n] = a[m×k] · b[n×k]ᵀ
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
/// c[m×n] = a[k×m]ᵀ · b[k×n]
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
/// Row-wise softmax over `cols` entries restricted to mask==1 positions.
/// Masked entries are written as exactly 0. Returns the index of the first
/// row with no valid entry, or `rows` if every row is valid.
std::size_t masked_softmax_rows(std::span<const double> logits, std::span<const std::uint8_t> mask,
                                std::span<double> out, std::size_t rows, std::size_t cols);

}  // namespace serial

namespace omp {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
std::size_t masked_softmax_rows(std::span<const double> logits, std::span<const std::uint8_t> mask,
                                std::span<double> out, std::size_t rows, std::size_t cols);

}  // namespace omp

// Dispatching entry points: use the OpenMP kernel once the work is large
// enough to amortize thread start-up, the serial one otherwise.
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
std::size_t masked_softmax_rows(std::span<const double> logits, std::span<const std::uint8_t> mask,
                                std::span<double> out, std::size_t rows, std::size_t cols);

/// Multiply-add count above which the dispatchers go parallel.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

/// Caps OpenMP worker threads from the MEMFUSE_THREADS environment variable.
/// No-op when the variable is unset or OpenMP is unavailable.
void apply_thread_limit_from_env();
int max_threads();

}  // namespace memfuse::kernels
