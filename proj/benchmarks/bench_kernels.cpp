#include <benchmark/benchmark.h>

#include <complex>
#include <random>

#include "triflow/phasor.hpp"

using namespace triflow;

namespace {

CMat random_cmat(int n, unsigned seed) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    CMat m(n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) m.at(r, c) = cx{d(gen), d(gen)};
    return m;
}

CDense hermitian_block(int n, unsigned seed) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    CDense m(n);
    for (int r = 0; r < n; ++r) {
        m.at(r, r) = d(gen);
        for (int c = r + 1; c < n; ++c) {
            const cx v{d(gen), d(gen)};
            m.at(r, c) = v;
            m.at(c, r) = std::conj(v);
        }
    }
    return m;
}

void bm_pinv3(benchmark::State& state) {
    const CMat m = random_cmat(3, 7);
    for (auto _ : state) benchmark::DoNotOptimize(pinv(m));
}
BENCHMARK(bm_pinv3);

void bm_hermitian_eig6(benchmark::State& state) {
    const CDense m = hermitian_block(6, 11);
    for (auto _ : state) benchmark::DoNotOptimize(hermitian_eigenvalues(m));
}
BENCHMARK(bm_hermitian_eig6);

void bm_rank1_residual6(benchmark::State& state) {
    const CDense m = hermitian_block(6, 13);
    for (auto _ : state) benchmark::DoNotOptimize(rank1_residual(m));
}
BENCHMARK(bm_rank1_residual6);

void bm_psd_residual_embedding12(benchmark::State& state) {
    const CDense m = hermitian_block(6, 17);
    for (auto _ : state) {
        Mat e = real_embedding(m);
        benchmark::DoNotOptimize(symmetric_eigenvalues(e));
    }
}
BENCHMARK(bm_psd_residual_embedding12);

}  // namespace
