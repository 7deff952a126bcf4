#include "envagent/bandit.hpp"

#include <benchmark/benchmark.h>

using namespace envagent;

static void BM_ThompsonEpisode(benchmark::State& state) {
    const GPBanditModel m = GPBanditModel::line_graph(static_cast<std::size_t>(state.range(0)), 2.0, 0.5, 0.25);
    std::uint64_t e = 0;
    for (auto _ : state) {
        Rng rng = stream_rng(3, {e++});
        benchmark::DoNotOptimize(run_episode(m, 50, rng));
    }
}
BENCHMARK(BM_ThompsonEpisode)->Arg(8)->Arg(32)->Arg(64);

static void BM_InfoGainSequential(benchmark::State& state) {
    const GPBanditModel m = GPBanditModel::line_graph(16, 2.0, 0.5, 0.0);
    std::vector<std::size_t> arms(static_cast<std::size_t>(state.range(0)));
    for (std::size_t t = 0; t < arms.size(); ++t) arms[t] = (t * 7) % 16;
    for (auto _ : state) benchmark::DoNotOptimize(info_gain(m, arms));
}
BENCHMARK(BM_InfoGainSequential)->Arg(10)->Arg(100)->Arg(1000);

static void BM_MaxInfoGainExact(benchmark::State& state) {
    const GPBanditModel m = GPBanditModel::line_graph(static_cast<std::size_t>(state.range(0)), 2.0, 0.5, 0.0);
    for (auto _ : state) benchmark::DoNotOptimize(max_info_gain(m, 20));
}
BENCHMARK(BM_MaxInfoGainExact)->Arg(2)->Arg(3)->Arg(4);

static void BM_DeltaEstimate(benchmark::State& state) {
    const GPBanditModel m = GPBanditModel::line_graph(8, 2.0, 0.5, 0.25);
    for (auto _ : state) benchmark::DoNotOptimize(delta_estimate(m, static_cast<std::size_t>(state.range(0)), 5));
}
BENCHMARK(BM_DeltaEstimate)->Arg(10000)->Unit(benchmark::kMillisecond);
