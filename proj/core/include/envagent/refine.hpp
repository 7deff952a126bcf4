#pragma once

// Multi-round propose/test/update loop over a factorized belief about the
// truth table.

#include "envagent/common.hpp"
#include "envagent/env_model.hpp"

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace envagent {

enum class FeedbackMode { oracle, self };
enum class Factorization { independent, test_first, code_first };
enum class Compression { full_history, summary_concat, insight_reformulate };

std::string_view to_string(FeedbackMode m);
std::string_view to_string(Factorization f);
std::string_view to_string(Compression c);
FeedbackMode parse_feedback_mode(std::string_view s);
Factorization parse_factorization(std::string_view s);
Compression parse_compression(std::string_view s);

/// Evidence carried between rounds. `oracle` marks records whose
/// expectations come from the true algorithm.
struct FeedbackRecord {
    std::size_t round = 0;
    bool oracle = false;
    std::vector<CaseRecord> cases;
};

/// Independent categorical factor per input.
class BeliefState {
public:
    /// Revealed inputs put `fidelity` on the described symbol and spread the
    /// rest evenly; example inputs are certain; ambiguous inputs are uniform.
    static BeliefState from_description(const Description& desc, double fidelity);

    [[nodiscard]] const Description& description() const { return desc_; }
    [[nodiscard]] std::size_t domain_size() const { return factors_.size(); }
    [[nodiscard]] double probability(std::size_t input, Symbol s) const;
    [[nodiscard]] const std::vector<double>& factor(std::size_t input) const { return factors_.at(input); }
    /// Inverse-CDF draw of the symbol at `input` for u in [0, 1).
    [[nodiscard]] Symbol quantile(std::size_t input, double u) const;
    /// Number of observations that had zero probability and were floored.
    [[nodiscard]] std::size_t floor_events() const { return floor_events_; }

    void collapse(std::size_t input, Symbol s);
    /// Multiplies the factor by a likelihood vector and renormalizes.
    void reweight(std::size_t input, const std::vector<double>& likelihood);

private:
    Description desc_;
    std::vector<std::vector<double>> factors_;
    std::size_t floor_events_ = 0;
};

struct LoopConfig {
    FeedbackMode feedback = FeedbackMode::self;
    Factorization factorization = Factorization::independent;
    Compression compression = Compression::full_history;
    std::size_t rounds = 10;
    std::size_t suite_size = 4;
    double fidelity = 0.8;
    double corruption = 0.1;

    void validate() const;
};

/// Folds one record into the belief. Oracle records collapse the inputs
/// they cover. Self records reweight revealed inputs with the suite's
/// corruption model; code-first records carry no information about the
/// truth and are ignored.
void belief_update(BeliefState& belief, const FeedbackRecord& record, const LoopConfig& config);

struct Proposal {
    BehaviorTable code;
    TestSuite suite;
};

/// Draws a program from the belief and a suite from the description. Program
/// symbols use one uniform per (seed, round, input), so conditions that
/// share a seed are coupled.
Proposal propose(const BeliefState& belief, const LoopConfig& config, std::uint64_t seed, std::size_t round);

/// Applies the compression policy to the full evidence history.
std::vector<FeedbackRecord> compress(const std::vector<FeedbackRecord>& history, Compression policy,
                                     std::size_t domain_size);

struct RoundMetrics {
    std::size_t round = 0;
    double oracle_rate = 0.0;
    double self_rate = 0.0;
};

struct Trajectory {
    std::vector<RoundMetrics> rounds;
    std::size_t floor_events = 0;

    [[nodiscard]] double final_oracle_rate() const { return rounds.empty() ? 0.0 : rounds.back().oracle_rate; }
};

Trajectory run_refinement(const AlgorithmSpec& alg, const Description& desc, const Environment& env,
                          const LoopConfig& config, std::uint64_t seed);

/// Columns: seed,round,oracle_rate,self_rate,mode,factorization,compression
void write_trajectory_csv_header(std::ostream& out);
/// `mode` defaults to the feedback mode name when empty.
void append_trajectory_csv(std::ostream& out, std::uint64_t seed, const LoopConfig& config, const Trajectory& t,
                           std::string_view mode = {});

}  // namespace envagent
