#pragma once

// Enumerable synthetic task world: latent algorithms, lossy descriptions,
// program and test samplers, and the execution harness.

#include "envagent/common.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace envagent {

enum class OutputMode { binary, generalized };

/// Execution context. Binary environments report pass/fail per case;
/// generalized ones report the program's raw output.
struct Environment {
    std::size_t alphabet_size = 2;
    OutputMode mode = OutputMode::binary;
    double eval_noise = 0.0;

    static Environment binary(double eval_noise = 0.0);
    static Environment generalized(std::size_t alphabet_size, double eval_noise = 0.0);

    [[nodiscard]] bool deterministic() const { return eval_noise == 0.0; }
    void validate() const;
};

/// Ground-truth behavior over a finite input domain.
struct AlgorithmSpec {
    std::size_t domain_size = 0;
    std::size_t alphabet_size = 0;
    std::vector<Symbol> truth;
    std::vector<std::size_t> ambiguous_inputs;  // sorted, unique

    [[nodiscard]] bool is_ambiguous(std::size_t input) const;
    void validate() const;
};

/// What the task statement pins down: the non-ambiguous part of the truth
/// table, optionally with a few explicit input/output examples.
struct Description {
    std::size_t domain_size = 0;
    std::size_t alphabet_size = 0;
    std::map<std::size_t, Symbol> revealed;
    std::vector<std::pair<std::size_t, Symbol>> example_pairs;
    double ambiguity_level = 0.0;

    [[nodiscard]] bool reveals(std::size_t input) const { return revealed.contains(input); }
    void validate() const;
};

/// A program, observed only through its input/output table.
struct BehaviorTable {
    std::vector<Symbol> outputs;
    std::uint64_t id = 0;
};

struct TestCase {
    std::size_t input = 0;
    std::optional<Symbol> expected;  // absent for input-only (generalized) cases

    friend bool operator==(const TestCase&, const TestCase&) = default;
};

struct TestSuite {
    std::vector<TestCase> cases;
    std::uint64_t id = 0;

    [[nodiscard]] std::size_t size() const { return cases.size(); }
};

/// Per-case harness output O(c, t | e).
using OutputVector = std::vector<Symbol>;

/// Reward held as an exact fraction; converted to double at the boundary.
struct PassCount {
    std::size_t passed = 0;
    std::size_t total = 0;

    [[nodiscard]] double value() const {
        return static_cast<double>(passed) / static_cast<double>(total);
    }
    [[nodiscard]] bool all_passed() const { return passed == total; }
    friend bool operator==(const PassCount&, const PassCount&) = default;
};

struct CaseRecord {
    std::size_t input = 0;
    Symbol expected = 0;
    Symbol got = 0;
    bool passed = false;

    friend bool operator==(const CaseRecord&, const CaseRecord&) = default;
};

/// Structured test report U(c, t | e).
struct Report {
    std::vector<CaseRecord> per_case;
    PassCount count;

    [[nodiscard]] double pass_fraction() const { return count.value(); }
};

struct DescriptionOptions {
    std::size_t example_count = 3;
};

struct SuiteOptions {
    /// Probability that a case targets an ambiguous input (when any exist).
    double ambient_fraction = 0.1;
    /// Emit input-only cases for generalized environments.
    bool input_only = false;
    std::uint64_t id = 0;
};

AlgorithmSpec sample_algorithm(std::size_t domain_size, std::size_t alphabet_size, double ambiguity_level,
                               Rng& rng);

Description sample_description(const AlgorithmSpec& alg, bool reveal_examples, Rng& rng,
                               const DescriptionOptions& options = {});

/// Models p(c | d): revealed inputs are reproduced with probability
/// `fidelity` (otherwise a uniformly drawn wrong symbol); unrevealed inputs
/// are uniform over the alphabet.
BehaviorTable sample_program(const Description& desc, double fidelity, Rng& rng, std::uint64_t id = 0);

/// Models p(t | d). Expected outputs on revealed inputs agree with the
/// description with probability 1 - corruption; ambiguous inputs get uniform
/// expectations.
TestSuite sample_test_suite(const Description& desc, std::size_t size, double corruption, Rng& rng,
                            const SuiteOptions& options = {});

/// One case per input with the true output as expectation.
TestSuite oracle_suite(const AlgorithmSpec& alg, std::uint64_t id = 0);

/// Deterministic harness; requires `e.eval_noise == 0`.
OutputVector execute(const BehaviorTable& c, const TestSuite& t, const Environment& e);

/// Noisy harness: each output is perturbed independently with probability
/// `e.eval_noise`.
OutputVector execute(const BehaviorTable& c, const TestSuite& t, const Environment& e, Rng& rng);

PassCount reward_exact(const BehaviorTable& c, const TestSuite& t, const Environment& e);
double reward(const BehaviorTable& c, const TestSuite& t, const Environment& e);

Report report(const BehaviorTable& c, const TestSuite& t, const Environment& e);

/// True when `c` reproduces the truth on every input.
bool passes_oracle(const BehaviorTable& c, const AlgorithmSpec& alg);

}  // namespace envagent
