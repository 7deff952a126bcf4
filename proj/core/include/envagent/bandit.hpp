#pragma once

// Gaussian-process Thompson sampling over a finite arm set with reward
// r = r_obs + r_hid, where only r_obs is ever observed (with noise).

#include "envagent/common.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace envagent {

struct GPBanditModel {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
    Eigen::VectorXd hid_mean;
    Eigen::MatrixXd hid_cov;
    Eigen::VectorXd noise_sd;

    [[nodiscard]] std::size_t arms() const { return static_cast<std::size_t>(mu.size()); }
    [[nodiscard]] double max_noise_sd() const { return noise_sd.maxCoeff(); }
    void validate() const;

    /// Squared-exponential covariance over arms 0..n-1 on a line (unit
    /// diagonal), zero prior means, homoscedastic noise and i.i.d. hidden
    /// rewards of variance `hid_var`.
    static GPBanditModel line_graph(std::size_t arms, double lengthscale, double noise_sd, double hid_var);
};

struct Observation {
    std::size_t arm = 0;
    double y = 0.0;
};

struct History {
    std::vector<Observation> steps;
};

struct Posterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Draws from N(mean, cov) through a clamped eigen square root, so
/// degenerate covariances are fine.
class GaussianSampler {
public:
    GaussianSampler(Eigen::VectorXd mean, const Eigen::MatrixXd& cov);
    Eigen::VectorXd draw(Rng& rng) const;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd factor_;
};

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax_lowest(const Eigen::VectorXd& v);

/// Exact Gaussian conditioning, one observation at a time.
Posterior posterior(const GPBanditModel& model, const History& history);

/// Rank-one update with observation noise variance `noise_var`. A jitter of
/// 1e-10 is added when the innovation variance vanishes.
void condition_on(Posterior& post, std::size_t arm, double y, double noise_var);

std::size_t thompson_step(const GPBanditModel& model, const History& history, Rng& rng);

/// x*_obs: argmax of the known r_obs plus a fresh hidden-reward draw.
std::size_t sample_obs_optimum(const GPBanditModel& model, const Eigen::VectorXd& r_obs, Rng& rng);

enum class Policy { thompson, uniform_random };

struct RegretTrace {
    std::vector<std::size_t> arms;
    std::vector<double> regret_obs;
    std::vector<double> regret_true;
    std::vector<double> cum_obs;
    std::vector<double> cum_true;
    /// Posterior variance of r_obs at the chosen arm before observing it.
    std::vector<double> predictive_variance;
};

RegretTrace run_episode(const GPBanditModel& model, std::size_t rounds, Rng& rng, Policy policy = Policy::thompson);

/// I(y_{1:T}; r_obs) for observing `arms` in order.
double info_gain(const GPBanditModel& model, std::span<const std::size_t> arms);

/// Same quantity from arm multiplicities: 1/2 log det(I + D^1/2 Sigma D^1/2)
/// with D = diag(count_x / sigma_x^2).
double info_gain_from_counts(const GPBanditModel& model, std::span<const std::size_t> counts);

enum class GammaMode { exact, greedy };

struct GammaReport {
    GammaMode mode = GammaMode::greedy;
    /// Indexed by horizon t = 0..T.
    std::vector<double> exact;             // filled in exact mode only
    std::vector<double> greedy_lower;      // greedy variance-maximizing sequence
    std::vector<double> repetition_upper;  // 1/2 sum_x ln(1 + t Sigma_xx / sigma_x^2)
};

/// Exact mode enumerates arm multisets when their number is within
/// `exact_budget`; otherwise only the greedy/upper bracket is reported.
GammaReport max_info_gain(const GPBanditModel& model, std::size_t horizon, std::size_t exact_budget = 2'000'000);

struct BoundIngredients {
    double beta = 0.0;
    double c_sigma = 0.0;
};

/// beta = 1 + sqrt(2 ln(2|X|) + 2), C_sigma = 2 / ln(1 + sigma^-2) for the
/// largest noise level.
BoundIngredients bound_ingredients(const GPBanditModel& model);

struct MeanWithError {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// Delta = E[r(x*) - r(x*_obs)] by Monte Carlo over the joint prior.
MeanWithError delta_estimate(const GPBanditModel& model, std::size_t draws, std::uint64_t seed,
                             std::size_t threads = 1);

enum class GammaSource { upper_surrogate, exact };

struct BoundOptions {
    Policy policy = Policy::thompson;
    GammaSource gamma = GammaSource::upper_surrogate;
    std::size_t delta_draws = 100'000;
    std::size_t threads = 1;
};

struct BoundReport {
    std::size_t horizon = 0;
    std::size_t episodes = 0;
    double beta = 0.0;
    double c_sigma = 0.0;
    MeanWithError delta;
    /// Per prefix t = 1..T (index t-1).
    std::vector<double> gamma;
    std::vector<double> bound_obs;
    std::vector<double> bound_true;
    std::vector<MeanWithError> cum_regret_obs;
    std::vector<MeanWithError> cum_regret_true;
    std::vector<MeanWithError> regret_obs;
    std::vector<MeanWithError> regret_true;
    /// Mean per-round regret vs x* over the last quarter of rounds.
    MeanWithError last_quartile_regret_true;
    bool satisfied_obs = false;
    bool satisfied_true = false;
};

/// Requires at least 100 episodes.
BoundReport verify_bounds(const GPBanditModel& model, std::size_t horizon, std::size_t episodes, std::uint64_t seed,
                          const BoundOptions& options = {});

struct DeviationReport {
    MeanWithError center;  // E|r_x - mu_x|
    MeanWithError pair;    // E|r_x - r'_x|
    double mean_variance = 0.0;  // E[Sigma_xx] at the selected arm
    double center_bound = 0.0;
    double pair_bound = 0.0;
    bool center_holds = false;
    bool pair_holds = false;
};

/// Checks both uniform bounds with x = argmax r.
DeviationReport deviation_check(const GPBanditModel& model, std::size_t draws, std::uint64_t seed, std::size_t threads = 1);

/// Columns: round,regret_obs,regret_true,cum_obs,cum_true
void write_regret_csv(std::ostream& out, const BoundReport& report);

}  // namespace envagent
