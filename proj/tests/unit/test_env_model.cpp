#include "envagent/env_model.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace envagent;
using oracle::suite;
using oracle::table;

TEST(SampleAlgorithm, ZeroAmbiguityMarksNothing) {
    Rng rng = stream_rng(1);
    const AlgorithmSpec a = sample_algorithm(4, 2, 0.0, rng);
    EXPECT_EQ(a.truth.size(), 4u);
    EXPECT_TRUE(a.ambiguous_inputs.empty());
}

TEST(SampleAlgorithm, AmbiguityIsFloored) {
    Rng rng = stream_rng(2);
    EXPECT_EQ(sample_algorithm(4, 2, 0.5, rng).ambiguous_inputs.size(), 2u);
    EXPECT_EQ(sample_algorithm(7, 2, 0.5, rng).ambiguous_inputs.size(), 3u);
}

TEST(SampleAlgorithm, SingleSymbolAlphabet) {
    Rng rng = stream_rng(3);
    const AlgorithmSpec a = sample_algorithm(1, 1, 0.0, rng);
    EXPECT_EQ(a.truth, std::vector<Symbol>{0});
}

TEST(SampleAlgorithm, RejectsEmptyDomainOrAlphabet) {
    Rng rng = stream_rng(4);
    EXPECT_THROW(sample_algorithm(0, 2, 0.0, rng), InvalidConfig);
    EXPECT_THROW(sample_algorithm(4, 0, 0.0, rng), InvalidConfig);
}

TEST(SampleDescription, LosslessWhenNothingIsAmbiguous) {
    Rng rng = stream_rng(5);
    const AlgorithmSpec a = sample_algorithm(6, 3, 0.0, rng);
    const Description d = sample_description(a, true, rng);
    ASSERT_EQ(d.revealed.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(d.revealed.at(i), a.truth[i]);
    EXPECT_FALSE(d.example_pairs.empty());
    for (const auto& [input, symbol] : d.example_pairs) EXPECT_EQ(d.revealed.at(input), symbol);
}

TEST(SampleDescription, AllButOneAmbiguous) {
    Rng rng = stream_rng(6);
    const AlgorithmSpec a = sample_algorithm(4, 2, 0.75, rng);
    const Description d = sample_description(a, true, rng);
    EXPECT_EQ(d.revealed.size(), 1u);
}

TEST(SampleDescription, HiddenExamples) {
    Rng rng = stream_rng(7);
    const AlgorithmSpec a = sample_algorithm(8, 2, 0.25, rng);
    EXPECT_TRUE(sample_description(a, false, rng).example_pairs.empty());
}

TEST(SampleProgram, PerfectFidelityReproducesTruth) {
    Rng rng = stream_rng(8);
    const AlgorithmSpec a = sample_algorithm(10, 4, 0.0, rng);
    const Description d = sample_description(a, false, rng);
    EXPECT_EQ(sample_program(d, 1.0, rng).outputs, a.truth);
}

TEST(SampleProgram, ZeroFidelityComplementsBinaryTable) {
    Rng rng = stream_rng(9);
    const AlgorithmSpec a = sample_algorithm(10, 2, 0.0, rng);
    const Description d = sample_description(a, false, rng);
    const BehaviorTable c = sample_program(d, 0.0, rng);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(c.outputs[i], 1 - a.truth[i]);
}

TEST(SampleProgram, AgreementRateMatchesFidelity) {
    Rng rng = stream_rng(10);
    const AlgorithmSpec a = sample_algorithm(5, 3, 0.0, rng);
    const Description d = sample_description(a, false, rng);
    std::vector<int> agree(5, 0);
    constexpr int kSamples = 1000;
    for (int s = 0; s < kSamples; ++s) {
        const BehaviorTable c = sample_program(d, 0.8, rng);
        for (std::size_t i = 0; i < 5; ++i) agree[i] += c.outputs[i] == a.truth[i];
    }
    for (int n : agree) EXPECT_NEAR(n / double(kSamples), 0.8, 0.04);
}

TEST(SampleTestSuite, CleanSuiteMatchesTruth) {
    Rng rng = stream_rng(11);
    const AlgorithmSpec a = sample_algorithm(8, 3, 0.0, rng);
    const Description d = sample_description(a, false, rng);
    const TestSuite t = sample_test_suite(d, 20, 0.0, rng);
    for (const auto& c : t.cases) EXPECT_EQ(*c.expected, a.truth[c.input]);
}

TEST(SampleTestSuite, FullCorruptionFlipsEveryBinaryExpectation) {
    Rng rng = stream_rng(12);
    const AlgorithmSpec a = sample_algorithm(8, 2, 0.0, rng);
    const Description d = sample_description(a, false, rng);
    const TestSuite t = sample_test_suite(d, 20, 1.0, rng);
    for (const auto& c : t.cases) EXPECT_EQ(*c.expected, 1 - a.truth[c.input]);
}

TEST(SampleTestSuite, RequestedSize) {
    Rng rng = stream_rng(13);
    const AlgorithmSpec a = sample_algorithm(8, 2, 0.25, rng);
    const Description d = sample_description(a, false, rng);
    EXPECT_EQ(sample_test_suite(d, 4, 0.1, rng).size(), 4u);
}

TEST(Execute, TruthPassesOracleSuite) {
    const AlgorithmSpec a{4, 2, {0, 1, 1, 0}, {}};
    const OutputVector o = execute(table(a.truth), oracle_suite(a), Environment::binary());
    EXPECT_EQ(o, (OutputVector{1, 1, 1, 1}));
}

TEST(Execute, SingleMismatchShowsAtThatCase) {
    const TestSuite t = suite({0, 1, 2, 3}, {0, 1, 1, 0});
    const OutputVector o = execute(table({0, 1, 0, 0}), t, Environment::binary());
    EXPECT_EQ(o, (OutputVector{1, 1, 0, 1}));
}

TEST(Execute, GeneralizedModeReturnsRawOutputs) {
    const OutputVector o =
        execute(table({0, 1, 1}), oracle::input_only_suite({0, 2}), Environment::generalized(2));
    EXPECT_EQ(o, (OutputVector{0, 1}));
}

TEST(Execute, InputOutsideDomainIsShapeError) {
    EXPECT_THROW(execute(table({0, 1}), suite({0, 5}, {0, 0}), Environment::binary()), ShapeError);
}

TEST(Execute, NoisyHarnessIsReproducibleForFixedSeed) {
    const Environment e = Environment::binary(0.3);
    const TestSuite t = suite({0, 1, 2, 3, 0, 1, 2, 3}, {0, 1, 1, 0, 0, 1, 1, 0});
    Rng r1 = stream_rng(99);
    Rng r2 = stream_rng(99);
    EXPECT_EQ(execute(table({0, 1, 1, 0}), t, e, r1), execute(table({0, 1, 1, 0}), t, e, r2));
}

TEST(Reward, CountsPassesExactly) {
    const Environment e = Environment::binary();
    const TestSuite t = suite({0, 1, 2, 3}, {0, 1, 1, 0});
    EXPECT_EQ(reward(table({0, 1, 1, 0}), t, e), 1.0);
    EXPECT_EQ(reward(table({0, 1, 0, 0}), t, e), 0.75);
    EXPECT_EQ(reward(table({1, 0, 0, 1}), t, e), 0.0);
    EXPECT_EQ(reward_exact(table({0, 1, 0, 0}), t, e), (PassCount{3, 4}));
}

TEST(Reward, GeneralizedModeUnsupported) {
    EXPECT_THROW(reward(table({0, 1}), oracle::input_only_suite({0}), Environment::generalized(3)),
                 UnsupportedMode);
}

TEST(Report, RecordsEveryCase) {
    const Environment e = Environment::binary();
    const TestSuite t = suite({0, 1, 2, 3}, {0, 1, 1, 0});
    const Report r = report(table({0, 1, 0, 0}), t, e);
    ASSERT_EQ(r.per_case.size(), 4u);
    EXPECT_EQ(r.per_case[2], (CaseRecord{2, 1, 0, false}));
    EXPECT_EQ(r.pass_fraction(), 0.75);
    EXPECT_EQ(report(table({0, 1, 1, 0}), t, e).pass_fraction(), 1.0);
    EXPECT_EQ(report(table({1, 0, 0, 1}), t, e).pass_fraction(), 0.0);
}

TEST(OracleSuite, OneCasePerInput) {
    const AlgorithmSpec a{4, 3, {2, 0, 1, 1}, {}};
    const TestSuite t = oracle_suite(a);
    ASSERT_EQ(t.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(t.cases[i], (TestCase{i, a.truth[i]}));
    EXPECT_TRUE(passes_oracle(table(a.truth), a));
}

TEST(OracleSuite, SingleDefectCostsOneCase) {
    const AlgorithmSpec a{5, 2, {0, 1, 1, 0, 1}, {}};
    for (std::size_t i = 0; i < 5; ++i) {
        BehaviorTable c = table(a.truth);
        c.outputs[i] ^= 1u;
        EXPECT_DOUBLE_EQ(reward(c, oracle_suite(a), Environment::binary()), 1.0 - 1.0 / 5.0);
        EXPECT_FALSE(passes_oracle(c, a));
    }
}

TEST(Samplers, ReproducibleAcrossCalls) {
    auto draw = [] {
        Rng rng = stream_rng(77, {3});
        const AlgorithmSpec a = sample_algorithm(12, 3, 0.25, rng);
        const Description d = sample_description(a, true, rng);
        return std::pair{sample_program(d, 0.7, rng).outputs, sample_test_suite(d, 6, 0.2, rng).cases};
    };
    EXPECT_EQ(draw(), draw());
}

TEST(Environment, BinaryForcesTwoSymbols) {
    Environment e = Environment::binary();
    e.alphabet_size = 3;
    EXPECT_THROW(e.validate(), InvalidConfig);
    EXPECT_THROW(Environment::binary(1.0).validate(), InvalidConfig);
}
