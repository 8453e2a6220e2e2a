// Serial reference kernels vs their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "memfuse/kernels.hpp"
#include "memfuse/model.hpp"
#include "memfuse/synthetic.hpp"

namespace {

using namespace memfuse;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

template <auto Kernel>
void bm_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_values(n * n, 1);
    const auto b = random_values(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        Kernel(a, b, c, {n, n, n});
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

template <auto Kernel>
void bm_softmax(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto logits = random_values(n * n, 3);
    std::vector<std::uint8_t> mask(n * n, 1);
    std::vector<double> out(n * n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(Kernel(logits, mask, out, n, n));
    }
}

void bm_predict_all(benchmark::State& state) {
    data::SyntheticSpec spec;
    spec.n_train = 256;
    spec.n_validation = 0;
    spec.n_test = 0;
    spec.n_rerank = 0;
    const auto ds = data::generate_synthetic(spec);
    ModelConfig c;
    c.latent_dim = static_cast<std::size_t>(state.range(0));
    c.num_heads = 2;
    c.fusion_hidden_dim = 32;
    for (auto m : kAllModalities) c.input_dims[m] = 16;
    const auto params = build(c, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(predict_all(params, c, ds.train).data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * ds.train.size()));
}

}  // namespace

BENCHMARK(bm_matmul<memfuse::kernels::serial::matmul>)->Name("matmul/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_matmul<memfuse::kernels::omp::matmul>)->Name("matmul/omp")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_matmul<memfuse::kernels::serial::matmul_nt>)->Name("matmul_nt/serial")->Arg(128)->Arg(256);
BENCHMARK(bm_matmul<memfuse::kernels::omp::matmul_nt>)->Name("matmul_nt/omp")->Arg(128)->Arg(256);
BENCHMARK(bm_softmax<memfuse::kernels::serial::masked_softmax_rows>)->Name("softmax/serial")->Arg(256)->Arg(1024);
BENCHMARK(bm_softmax<memfuse::kernels::omp::masked_softmax_rows>)->Name("softmax/omp")->Arg(256)->Arg(1024);
BENCHMARK(bm_predict_all)->Name("predict_all")->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
