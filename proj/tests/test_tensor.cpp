#include <gtest/gtest.h>

#include <random>

#include "memfuse/errors.hpp"
#include "memfuse/kernels.hpp"
#include "memfuse/tensor.hpp"
#include "test_support.hpp"

using namespace memfuse;

TEST(Tensor, ShapeAndDataAgree) {
    Tensor t({2, 3});
    EXPECT_EQ(t.numel(), 6u);
    EXPECT_EQ(t.rank(), 2u);
    EXPECT_EQ(t.dim(1), 3u);
    EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
    EXPECT_THROW(Tensor({0, 3}), DimensionError);
}

TEST(Tensor, GradSlotMatchesShape) {
    Tensor t = Tensor::matrix({{1, 2}, {3, 4}});
    EXPECT_FALSE(t.has_grad());
    EXPECT_EQ(t.grad().size(), t.numel());
    for (double g : t.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Tensor, MatrixAccess) {
    const Tensor t = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
    EXPECT_EQ(t.at(1, 2), 6.0);
    EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
    EXPECT_THROW(t.item(), DimensionError);
}

TEST(Tensor, FiniteCheck) {
    Tensor t = Tensor::vector({1.0, 2.0});
    EXPECT_TRUE(t.all_finite());
    t[1] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(t.all_finite());
}

namespace {

using KernelFn = void (*)(std::span<const double>, std::span<const double>, std::span<double>, kernels::MatDims);

struct KernelCase {
    KernelFn serial;
    KernelFn omp;
    KernelFn dispatch;
};

}  // namespace

TEST(Kernels, SerialAndOpenMPAreBitwiseEqual) {
    const KernelCase cases[] = {
        {kernels::serial::matmul, kernels::omp::matmul, kernels::matmul},
        {kernels::serial::matmul_nt, kernels::omp::matmul_nt, kernels::matmul_nt},
        {kernels::serial::matmul_tn, kernels::omp::matmul_tn, kernels::matmul_tn},
    };
    std::mt19937_64 rng(11);
    for (const auto& kc : cases) {
        for (kernels::MatDims d : {kernels::MatDims{3, 5, 7}, kernels::MatDims{64, 80, 96}, kernels::MatDims{1, 1, 1}}) {
            const auto a = memfuse::testing::random_tensor({d.m * d.k}, rng);
            const auto b = memfuse::testing::random_tensor({d.k * d.n}, rng);
            std::vector<double> c1(d.m * d.n), c2(d.m * d.n), c3(d.m * d.n);
            kc.serial(a.data(), b.data(), c1, d);
            kc.omp(a.data(), b.data(), c2, d);
            kc.dispatch(a.data(), b.data(), c3, d);
            EXPECT_EQ(c1, c2);
            EXPECT_EQ(c1, c3);
        }
    }
}

TEST(Kernels, MatmulAgreesWithNaiveTripleLoop) {
    std::mt19937_64 rng(5);
    const kernels::MatDims d{4, 6, 3};
    const auto a = memfuse::testing::random_tensor({d.m * d.k}, rng);
    const auto b = memfuse::testing::random_tensor({d.k * d.n}, rng);
    std::vector<double> c(d.m * d.n), nt(d.m * d.n), tn(d.m * d.n);
    kernels::serial::matmul(a.data(), b.data(), c, d);

    std::vector<double> bt(d.n * d.k), at(d.k * d.m);
    for (std::size_t i = 0; i < d.k; ++i)
        for (std::size_t j = 0; j < d.n; ++j) bt[j * d.k + i] = b[i * d.n + j];
    for (std::size_t i = 0; i < d.m; ++i)
        for (std::size_t j = 0; j < d.k; ++j) at[j * d.m + i] = a[i * d.k + j];
    kernels::serial::matmul_nt(a.data(), bt, nt, d);
    kernels::serial::matmul_tn(at, b.data(), tn, d);

    for (std::size_t i = 0; i < d.m; ++i) {
        for (std::size_t j = 0; j < d.n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < d.k; ++p) s += a[i * d.k + p] * b[p * d.n + j];
            EXPECT_NEAR(c[i * d.n + j], s, 1e-14);
            EXPECT_NEAR(nt[i * d.n + j], s, 1e-14);
            EXPECT_NEAR(tn[i * d.n + j], s, 1e-14);
        }
    }
}

TEST(Kernels, MaskedSoftmaxSerialAndOpenMPAgree) {
    std::mt19937_64 rng(3);
    const std::size_t rows = 300, cols = 257;
    const auto logits = memfuse::testing::random_tensor({rows * cols}, rng, -5, 5);
    std::vector<std::uint8_t> mask(rows * cols);
    std::bernoulli_distribution keep(0.7);
    for (auto& m : mask) m = keep(rng);
    for (std::size_t r = 0; r < rows; ++r) mask[r * cols] = 1;
    std::vector<double> a(rows * cols), b(rows * cols);
    EXPECT_EQ(kernels::serial::masked_softmax_rows(logits.data(), mask, a, rows, cols), rows);
    EXPECT_EQ(kernels::omp::masked_softmax_rows(logits.data(), mask, b, rows, cols), rows);
    EXPECT_EQ(a, b);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            if (!mask[r * cols + c]) EXPECT_EQ(a[r * cols + c], 0.0);
            s += a[r * cols + c];
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Kernels, MaskedSoftmaxReportsFirstDegenerateRow) {
    const std::vector<double> logits(6, 0.0);
    const std::vector<std::uint8_t> mask = {1, 1, 0, 0, 1, 0};
    std::vector<double> out(6);
    EXPECT_EQ(kernels::serial::masked_softmax_rows(logits, mask, out, 3, 2), 1u);
    EXPECT_EQ(kernels::omp::masked_softmax_rows(logits, mask, out, 3, 2), 1u);
}
