#include "envagent/refine.hpp"
#include "envagent/selector.hpp"

#include <benchmark/benchmark.h>

using namespace envagent;

static void BM_BuildAndScore(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng = stream_rng(4);
    const AlgorithmSpec a = sample_algorithm(8, 2, 0.25, rng);
    const Description d = sample_description(a, false, rng);
    std::vector<BehaviorTable> codes;
    std::vector<TestSuite> suites;
    for (std::size_t i = 0; i < n; ++i) codes.push_back(sample_program(d, 0.8, rng, i));
    for (std::size_t j = 0; j < n; ++j) suites.push_back(sample_test_suite(d, 4, 0.1, rng));
    for (auto _ : state) {
        const ExecutionMatrix m = build_execution_matrix(codes, suites, Environment::binary());
        for (Heuristic h : {Heuristic::MaxPassSoft, Heuristic::CodeTSoft, Heuristic::MBRExecSoft}) {
            benchmark::DoNotOptimize(score(m, h));
        }
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildAndScore)->RangeMultiplier(2)->Range(10, 80)->Complexity();

static void BM_RefinementTrajectory(benchmark::State& state) {
    Rng rng = stream_rng(5);
    const AlgorithmSpec a = sample_algorithm(static_cast<std::size_t>(state.range(0)), 2, 0.25, rng);
    const Description d = sample_description(a, true, rng);
    LoopConfig cfg;
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(run_refinement(a, d, Environment::binary(), cfg, seed++));
}
BENCHMARK(BM_RefinementTrajectory)->Arg(8)->Arg(64);
