#pragma once

// Post-generation selection heuristics over a cached execution matrix,
// greedy Pass@k selection, and the code-test calibration check.

#include "envagent/common.hpp"
#include "envagent/env_model.hpp"
#include "envagent/similarity.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace envagent {

enum class Heuristic {
    Random,
    MBRExecHard,
    MBRExecSoft,
    AlphaCode,
    FunCoder,
    MaxPassHard,
    MaxPassSoft,
    CodeTHard,
    CodeTSoft,
};

inline constexpr std::array<Heuristic, 9> kAllHeuristics = {
    Heuristic::Random,      Heuristic::MBRExecHard, Heuristic::MBRExecSoft, Heuristic::AlphaCode, Heuristic::FunCoder,
    Heuristic::MaxPassHard, Heuristic::MaxPassSoft, Heuristic::CodeTHard,   Heuristic::CodeTSoft,
};

std::string_view to_string(Heuristic h);
/// Case-insensitive; throws InvalidConfig listing the valid names.
Heuristic parse_heuristic(std::string_view name);
/// Parses a comma-separated list such as "codetsoft,MaxPassHard".
std::vector<Heuristic> parse_heuristic_list(std::string_view list);
/// AlphaCode and FunCoder compare raw outputs; every other non-random
/// heuristic needs pass/fail results.
bool needs_raw_outputs(Heuristic h);

/// Cached harness outputs for n programs against m suites. `mode` decides
/// whether `outputs[i][j]` holds pass/fail indicators or raw outputs.
struct ExecutionMatrix {
    OutputMode mode = OutputMode::binary;
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<std::uint64_t> code_ids;
    std::vector<std::uint64_t> suite_ids;
    std::vector<std::size_t> suite_sizes;
    std::vector<std::vector<OutputVector>> outputs;

    /// R(c_i, t_j | e) as an exact count; binary mode only.
    [[nodiscard]] PassCount pass_count(std::size_t i, std::size_t j) const;
    [[nodiscard]] double pass_fraction(std::size_t i, std::size_t j) const { return pass_count(i, j).value(); }
    void validate() const;
};

ExecutionMatrix build_execution_matrix(std::span<const BehaviorTable> codes, std::span<const TestSuite> suites,
                                       const Environment& e);

struct ScoreConfig {
    /// Seed for the Random heuristic.
    std::uint64_t seed = 0;
    /// Length of the returned top-k list.
    std::size_t k = 1;
};

struct SelectionScore {
    Heuristic heuristic = Heuristic::Random;
    std::vector<double> scores;
    /// Top-k code indices ordered by (score desc, code_id asc).
    std::vector<std::size_t> chosen;
};

SelectionScore score(const ExecutionMatrix& matrix, Heuristic heuristic, const ScoreConfig& config = {});

/// Top-k indices by score with ties broken by ascending code id (index when
/// `code_ids` is empty).
std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k,
                                      std::span<const std::uint64_t> code_ids = {});

/// Groups programs whose output rows are identical across all suites.
/// Returns the class index of each program; classes are numbered by first
/// appearance.
std::vector<std::size_t> empirical_classes(const ExecutionMatrix& matrix);

/// Class index owning the top-1 slot when scores are computed on one
/// representative per class (aliases factored out).
std::size_t class_level_top1(const ExecutionMatrix& matrix, Heuristic heuristic, const ScoreConfig& config = {});

/// 1 iff some chosen program passes the oracle suite of `alg`.
int pass_at_k_eval(std::span<const BehaviorTable> chosen, const AlgorithmSpec& alg, const Environment& e);

struct GreedyOptimality {
    std::vector<std::size_t> greedy_set;
    Rational greedy_value;
    Rational best_value;
    std::vector<std::size_t> best_set;
    bool optimal = false;
};

/// Compares the greedy top-k class mass with the best of all C(n, k) subsets
/// in exact arithmetic. At most 20 classes.
GreedyOptimality greedy_optimality_check(std::span<const double> class_probs, std::size_t k);

/// Max over supported programs of |p(N_c^inf) - P_t[R(c, t | e) = 1]|, exact.
Rational calibration_check(const CodeDistribution& codes, const SuiteDistribution& dist, const Environment& e);

struct CalibratedFamily {
    CodeDistribution codes;
    SuiteDistribution suites;
};

/// Builds `classes` distinct behaviors around `alg.truth` (the truth plus
/// perturbations), splits each class's mass over `aliases_per_class`
/// identical programs, and pairs every class with a full-domain suite of the
/// same mass that only that class passes. Masses are dyadic.
CalibratedFamily make_calibrated_family(const AlgorithmSpec& alg, std::size_t classes, std::size_t aliases_per_class,
                                        Rng& rng);

}  // namespace envagent
