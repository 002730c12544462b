#include <benchmark/benchmark.h>

#include "avarkit/allan.hpp"
#include "avarkit/identify.hpp"
#include "avarkit/noise_model.hpp"

using namespace avarkit;

namespace {

SimSpec composite(std::size_t n) {
    SimSpec s;
    s.label = "gyro.x";
    s.dt = 0.01;
    s.n_samples = n;
    s.seed = 1;
    s.params.q = 0.0002;
    s.params.n = 0.006;
    s.params.b = 0.0034;
    s.params.k = 6.129;
    s.params.bi_period = 100.0;
    s.enabled = {Process::white, Process::quantization, Process::random_walk, Process::bias_instability};
    return s;
}

void BM_AvarOverlapping(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const SampleSeries s = simulate_composite(composite(n));
    const TauGrid grid = tau_grid_log(s.dt(), n, 10);
    for (auto _ : state) benchmark::DoNotOptimize(avar_overlapping(s, grid));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AvarOverlapping)->RangeMultiplier(10)->Range(10'000, 1'000'000)->Unit(benchmark::kMillisecond);

void BM_AvarStandard(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const SampleSeries s = simulate_composite(composite(n));
    const TauGrid grid = tau_grid_log(s.dt(), n, 10);
    for (auto _ : state) benchmark::DoNotOptimize(avar_standard(s, grid));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AvarStandard)->RangeMultiplier(10)->Range(10'000, 1'000'000)->Unit(benchmark::kMillisecond);

void BM_SimulateComposite(benchmark::State& state) {
    const SimSpec spec = composite(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(simulate_composite(spec));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateComposite)->RangeMultiplier(10)->Range(10'000, 1'000'000)->Unit(benchmark::kMillisecond);

void BM_AnalyzeChannel(benchmark::State& state) {
    const SampleSeries s = simulate_composite(composite(static_cast<std::size_t>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(analyze_channel(s));
}
BENCHMARK(BM_AnalyzeChannel)->Arg(100'000)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
