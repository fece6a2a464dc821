#include "jlgcn/graph.hpp"
#include "jlgcn/layer.hpp"
#include "jlgcn/linalg.hpp"
#include "jlgcn/rng.hpp"

#include <benchmark/benchmark.h>

using jlgcn::DenseMatrix;
using jlgcn::Rng;

namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    DenseMatrix m(r, c);
    for (double& v : m.values()) {
        v = rng.uniform(-1.0, 1.0);
    }
    return m;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const DenseMatrix a = random_matrix(n, n, rng);
    const DenseMatrix b = random_matrix(n, 64, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(jlgcn::linalg::matmul(a, b));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * 64));
}
BENCHMARK(BM_Matmul)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_KernelAdjacency(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    const DenseMatrix f = random_matrix(n, 64, rng);
    const jlgcn::MetricFactor<double> metric(random_matrix(64, 16, rng));
    for (auto _ : state) {
        const auto d = jlgcn::graph::mahalanobis_distances(f, metric);
        benchmark::DoNotOptimize(jlgcn::graph::kernel_adjacency(d));
    }
}
BENCHMARK(BM_KernelAdjacency)->Arg(128)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_Glr(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    const DenseMatrix f = random_matrix(n, 16, rng);
    const jlgcn::MetricFactor<double> metric(random_matrix(16, 8, rng));
    const auto graph = jlgcn::graph::kernel_adjacency(jlgcn::graph::mahalanobis_distances(f, metric));
    for (auto _ : state) {
        benchmark::DoNotOptimize(jlgcn::graph::glr(graph, f));
    }
}
BENCHMARK(BM_Glr)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);

// One learned-graph layer, forward and backward, in both precisions.
template <typename T>
void BM_LayerStep(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    jlgcn::LayerConfig cfg{.in_dim = 64, .out_dim = 16, .rank = 16};
    jlgcn::LayerState<T> layer{jlgcn::LayerParams<T>::init(cfg, rng), {}};
    const DenseMatrix fd = random_matrix(n, 64, rng);
    jlgcn::Matrix<T> f(n, 64);
    for (std::size_t i = 0; i < f.size(); ++i) {
        f.values()[i] = static_cast<T>(fd.values()[i]);
    }
    const jlgcn::Matrix<T> graph(n, n);
    jlgcn::Matrix<T> upstream(n, 16);
    for (T& v : upstream.values()) {
        v = static_cast<T>(rng.uniform(-1.0, 1.0));
    }
    for (auto _ : state) {
        layer.forward(f, graph, true);
        benchmark::DoNotOptimize(layer.backward(upstream, T(1e-4)));
    }
}
BENCHMARK(BM_LayerStep<double>)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LayerStep<float>)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

} // namespace
