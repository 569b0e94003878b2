// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "dnahnet/kernels.hpp"
#include "dnahnet/random.hpp"

using namespace dnahnet;
using kernels::Trans;

namespace {

std::vector<double> random_vec(std::size_t n) {
    Rng rng(n);
    std::vector<double> v(n);
    for (auto& x : v) x = 2.0 * uniform01(rng) - 1.0;
    return v;
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto a = random_vec(n * n), b = random_vec(n * n);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::gemm(Trans::no, Trans::yes, n, n, n, a, b, c, false);
        } else {
            kernels::gemm_serial(Trans::no, Trans::yes, n, n, n, a, b, c, false);
        }
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}

template <bool Parallel>
void BM_scan(benchmark::State& state) {
    const std::size_t rows = static_cast<std::size_t>(state.range(0)), cols = 256;
    const auto a = random_vec(rows * cols), x = random_vec(rows * cols);
    std::vector<double> s(rows * cols);
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::scan(rows, cols, a, {cols, 1}, x, s);
        } else {
            kernels::scan_serial(rows, cols, a, {cols, 1}, x, s);
        }
        benchmark::DoNotOptimize(s.data());
    }
}

template <bool Parallel>
void BM_attention(benchmark::State& state) {
    const int len = static_cast<int>(state.range(0)), dim = 64, heads = 4;
    const auto q = random_vec(len * dim), k = random_vec(len * dim), v = random_vec(len * dim);
    std::vector<double> o(len * dim), lse(heads * len);
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::attention_forward(len, dim, heads, q, k, v, o, lse);
        } else {
            kernels::attention_forward_serial(len, dim, heads, q, k, v, o, lse);
        }
        benchmark::DoNotOptimize(o.data());
    }
}

}  // namespace

BENCHMARK(BM_gemm<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_scan<false>)->Arg(1024)->Arg(8192);
BENCHMARK(BM_scan<true>)->Arg(1024)->Arg(8192);
BENCHMARK(BM_attention<false>)->Arg(256)->Arg(1024);
BENCHMARK(BM_attention<true>)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
