#include "jlgcn/config.hpp"
#include "jlgcn/training.hpp"

#include <benchmark/benchmark.h>

namespace {

// Whole epochs on a synthetic citation graph; range(0) is the node count.
void BM_NodeEpoch(benchmark::State& state) {
    jlgcn::TrainConfig cfg;
    cfg.synth_citation.nodes = static_cast<std::size_t>(state.range(0));
    cfg.synth_citation.features = 500;
    cfg.epochs = 5;
    cfg.seeds = {0};
    const jlgcn::TaskData data = jlgcn::load_task_data(cfg);
    for (auto _ : state) {
        benchmark::DoNotOptimize(jlgcn::train(cfg, data));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(cfg.epochs));
}
BENCHMARK(BM_NodeEpoch)->Arg(600)->Arg(2708)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_PointSetEpoch(benchmark::State& state) {
    jlgcn::TrainConfig cfg = jlgcn::profile("pointset");
    cfg.hidden = {32, 64, 256};
    cfg.head = {128};
    cfg.synth_points.per_class = 20;
    cfg.epochs = 1;
    const jlgcn::TaskData data = jlgcn::load_task_data(cfg);
    for (auto _ : state) {
        benchmark::DoNotOptimize(jlgcn::train(cfg, data));
    }
}
BENCHMARK(BM_PointSetEpoch)->Unit(benchmark::kMillisecond)->Iterations(1);

} // namespace

BENCHMARK_MAIN();
