#pragma once

// Config-driven batch runner: parses a JSON experiment document, executes
// it over a list of seeds and writes CSV results plus a manifest.

#include "envagent/bandit.hpp"
#include "envagent/common.hpp"
#include "envagent/env_model.hpp"
#include "envagent/refine.hpp"
#include "envagent/selector.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace envagent {

struct CheckResult;

/// Invalid configuration with the offending field paths, e.g.
/// {"selection.n", "bandit.horizen"}.
class ConfigError : public InvalidConfig {
public:
    explicit ConfigError(std::vector<std::string> fields, const std::string& detail = {});
    [[nodiscard]] const std::vector<std::string>& fields() const { return fields_; }

private:
    std::vector<std::string> fields_;
};

/// A seed failed mid-batch; the batch is aborted.
class SeedFailure : public Error {
public:
    SeedFailure(std::uint64_t seed, const std::string& what);
    [[nodiscard]] std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
};

enum class ExperimentKind { env, selection, bandit, refinement, verify };

std::string_view to_string(ExperimentKind k);

struct EnvParams {
    std::size_t domain_size = 8;
    std::size_t alphabet_size = 2;
    double ambiguity = 0.25;
    double eval_noise = 0.0;
};

struct SelectionParams {
    std::size_t tasks = 200;
    std::size_t n = 10;
    std::size_t m = 10;
    std::size_t k = 1;
    std::size_t suite_size = 4;
    double fidelity = 0.8;
    double corruption = 0.1;
    std::vector<Heuristic> heuristics{kAllHeuristics.begin(), kAllHeuristics.end()};
    /// Reuse/write execution-matrix caches under <out>/cache.
    bool cache = false;
};

struct BanditParams {
    std::size_t arms = 8;
    double lengthscale = 2.0;
    double noise_sd = 0.5;
    double hid_var = 0.25;
    std::size_t horizon = 50;
    std::size_t episodes = 500;
    Policy policy = Policy::thompson;
    std::size_t delta_draws = 100'000;
};

struct RefineCondition {
    FeedbackMode feedback = FeedbackMode::self;
    bool reveal_examples = false;

    /// "oracle", "self" or "self+examples".
    [[nodiscard]] std::string label() const;
};

struct RefineParams {
    std::size_t rounds = 10;
    std::size_t suite_size = 4;
    double fidelity = 0.8;
    double corruption = 0.1;
    Factorization factorization = Factorization::independent;
    Compression compression = Compression::full_history;
    std::size_t example_count = 3;
    std::vector<RefineCondition> conditions{{FeedbackMode::oracle, false},
                                            {FeedbackMode::self, true},
                                            {FeedbackMode::self, false}};
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::selection;
    std::vector<std::uint64_t> seeds{0};
    std::size_t parallel = 1;
    std::filesystem::path output_dir = "out";
    EnvParams environment;
    SelectionParams selection;
    BanditParams bandit;
    RefineParams refinement;
    /// Verify only: comma-separated check names, empty for all.
    std::string filter;

    /// Throws ConfigError naming every invalid field.
    void validate() const;
};

/// Parses and validates. Unknown keys are rejected; missing keys take the
/// defaults above.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Full normalized document (all defaults filled in).
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Parses "0,1,5-9" into {0,1,5,6,7,8,9}.
std::vector<std::uint64_t> parse_seed_list(std::string_view list);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
/// Hash of the normalized config; independent of key order in the source,
/// the worker count and the output directory.
std::string config_hash(const ExperimentConfig& cfg);

struct RunManifest {
    std::string config_hash;
    std::string version;
    std::string kind;
    std::vector<std::uint64_t> seeds;
    std::vector<std::filesystem::path> outputs;
    double wall_clock_seconds = 0.0;
    /// Verify runs: 0 all checks passed, 1 otherwise.
    int exit_code = 0;
};

nlohmann::json manifest_to_json(const RunManifest& m);

/// Runs the experiment and writes outputs and manifest.json under
/// cfg.output_dir. `on_check` sees each verify result as it completes.
RunManifest run(const ExperimentConfig& cfg, const std::function<void(const CheckResult&)>& on_check = {});

/// Library version string.
std::string version();

// Per-experiment drivers, exposed for tests. Each returns the CSV text.

struct SelectionRow {
    std::uint64_t seed = 0;
    std::size_t task = 0;
    Heuristic heuristic = Heuristic::Random;
    int pass_at_1 = 0;
};

/// Builds task `task` for `seed` and evaluates every configured heuristic.
std::vector<SelectionRow> run_selection_task(const EnvParams& env, const SelectionParams& params, std::uint64_t seed,
                                             std::size_t task);
std::string selection_csv(const ExperimentConfig& cfg);
std::string bandit_csv(const ExperimentConfig& cfg);
std::string refinement_csv(const ExperimentConfig& cfg);

/// The task instance shared by the selection driver and gen-env.
struct TaskInstance {
    AlgorithmSpec algorithm;
    Description description;
    std::vector<BehaviorTable> codes;
    std::vector<TestSuite> suites;
};

TaskInstance make_selection_task(const EnvParams& env, const SelectionParams& params, std::uint64_t seed,
                                 std::size_t task);

GPBanditModel make_bandit_model(const BanditParams& params);

/// Trajectory of one refinement task for the given condition.
Trajectory run_refinement_task(const EnvParams& env, const RefineParams& params, const RefineCondition& cond,
                               std::uint64_t seed);

}  // namespace envagent
