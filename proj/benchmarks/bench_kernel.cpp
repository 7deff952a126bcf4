#include "envagent/similarity.hpp"

#include <benchmark/benchmark.h>

using namespace envagent;

namespace {

struct Batch {
    std::vector<BehaviorTable> codes;
    SuiteDistribution suites;
};

Batch make_batch(std::size_t codes, std::size_t suites) {
    Rng rng = stream_rng(1);
    const AlgorithmSpec a = sample_algorithm(16, 2, 0.25, rng);
    const Description d = sample_description(a, false, rng);
    Batch b;
    for (std::size_t i = 0; i < codes; ++i) b.codes.push_back(sample_program(d, 0.7, rng, i));
    std::vector<TestSuite> ts;
    for (std::size_t j = 0; j < suites; ++j) ts.push_back(sample_test_suite(d, 4, 0.1, rng));
    b.suites = SuiteDistribution::uniform(std::move(ts));
    return b;
}

}  // namespace

static void BM_Gram(benchmark::State& state) {
    const Batch b = make_batch(static_cast<std::size_t>(state.range(0)), 8);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gram(b.codes, b.suites, Sharpness::finite(2), Environment::binary()));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Gram)->RangeMultiplier(2)->Range(4, 64)->Complexity();

static void BM_PsdCheck(benchmark::State& state) {
    const Batch b = make_batch(static_cast<std::size_t>(state.range(0)), 8);
    const GramMatrix g = gram(b.codes, b.suites, Sharpness::finite(1), Environment::binary());
    for (auto _ : state) benchmark::DoNotOptimize(psd_check(g.entries));
}
BENCHMARK(BM_PsdCheck)->RangeMultiplier(2)->Range(4, 64);

static void BM_NeighborhoodExactRational(benchmark::State& state) {
    const Batch b = make_batch(16, static_cast<std::size_t>(state.range(0)));
    const auto codes = CodeDistribution::uniform(b.codes);
    for (auto _ : state) {
        benchmark::DoNotOptimize(neighborhood_measure_exact_rational(b.codes[0], codes, b.suites,
                                                                     Sharpness::finite(3), Environment::binary()));
    }
}
BENCHMARK(BM_NeighborhoodExactRational)->Arg(2)->Arg(8);
