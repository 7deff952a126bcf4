#include "envagent/bandit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace envagent {

namespace {

constexpr double kJitter = 1e-10;

bool symmetric(const Eigen::MatrixXd& m) {
    return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
}

Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
    return z;
}

double standard_normal(Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    return normal(rng);
}

struct Accumulator {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;

    void add(double x) {
        sum += x;
        sum_sq += x * x;
        ++count;
    }
    void merge(const Accumulator& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        count += o.count;
    }
    [[nodiscard]] MeanWithError summary() const {
        MeanWithError out;
        if (count == 0) return out;
        const double n = static_cast<double>(count);
        out.mean = sum / n;
        if (count > 1) {
            const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
            out.standard_error = std::sqrt(var / n);
        }
        return out;
    }
};

constexpr std::size_t kBlock = 4096;

double log_det_spd(const Eigen::MatrixXd& a) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw DegenerateDistribution("log_det: matrix is not positive definite");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

/// C(n + k, k) capped at `cap + 1`.
std::size_t multiset_count(std::size_t arms, std::size_t horizon, std::size_t cap) {
    double c = 1.0;
    for (std::size_t i = 1; i <= arms; ++i) {
        c = c * static_cast<double>(horizon + i) / static_cast<double>(i);
        if (c > static_cast<double>(cap)) return cap + 1;
    }
    return static_cast<std::size_t>(std::llround(c));
}

}  // namespace

void GPBanditModel::validate() const {
    const Eigen::Index n = mu.size();
    if (n == 0) throw InvalidConfig("bandit model needs at least one arm");
    if (sigma.rows() != n || sigma.cols() != n) throw ShapeError("sigma must be |X| x |X|");
    if (hid_mean.size() != n) throw ShapeError("hid_mean must have |X| entries");
    if (hid_cov.rows() != n || hid_cov.cols() != n) throw ShapeError("hid_cov must be |X| x |X|");
    if (noise_sd.size() != n) throw ShapeError("noise_sd must have |X| entries");
    if (!symmetric(sigma)) throw InvalidInput("sigma must be symmetric");
    if (!symmetric(hid_cov)) throw InvalidInput("hid_cov must be symmetric");
    if ((noise_sd.array() <= 0.0).any()) throw InvalidConfig("noise_sd entries must be positive");
    if ((sigma.diagonal().array() > 1.0).any()) throw InvalidConfig("sigma diagonal entries must not exceed 1");
    const double tol = 1e-9;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol * std::max(1.0, es.eigenvalues().maxCoeff())) {
        throw InvalidInput("sigma must be positive semidefinite");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eh(hid_cov, Eigen::EigenvaluesOnly);
    if (eh.eigenvalues().minCoeff() < -tol * std::max(1.0, eh.eigenvalues().maxCoeff())) {
        throw InvalidInput("hid_cov must be positive semidefinite");
    }
}

GPBanditModel GPBanditModel::line_graph(std::size_t arms, double lengthscale, double noise_sd, double hid_var) {
    if (arms == 0) throw InvalidConfig("line_graph: need at least one arm");
    if (!(lengthscale > 0.0)) throw InvalidConfig("line_graph: lengthscale must be positive");
    if (!(hid_var >= 0.0)) throw InvalidConfig("line_graph: hid_var must be nonnegative");
    const auto n = static_cast<Eigen::Index>(arms);
    GPBanditModel m;
    m.mu = Eigen::VectorXd::Zero(n);
    m.sigma.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = static_cast<double>(i - j);
            m.sigma(i, j) = std::exp(-d * d / (2.0 * lengthscale * lengthscale));
        }
    }
    m.hid_mean = Eigen::VectorXd::Zero(n);
    m.hid_cov = hid_var * Eigen::MatrixXd::Identity(n, n);
    m.noise_sd = Eigen::VectorXd::Constant(n, noise_sd);
    m.validate();
    return m;
}

GaussianSampler::GaussianSampler(Eigen::VectorXd mean, const Eigen::MatrixXd& cov) : mean_(std::move(mean)) {
    if (cov.rows() != mean_.size() || cov.cols() != mean_.size()) throw ShapeError("sampler: covariance shape");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    factor_ = es.eigenvectors() * root.asDiagonal();
}

Eigen::VectorXd GaussianSampler::draw(Rng& rng) const { return mean_ + factor_ * standard_normal(rng, mean_.size()); }

std::size_t argmax_lowest(const Eigen::VectorXd& v) {
    if (v.size() == 0) throw InvalidInput("argmax of an empty vector");
    std::size_t best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v(i) > v(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
    }
    return best;
}

void condition_on(Posterior& post, std::size_t arm, double y, double noise_var) {
    const auto a = static_cast<Eigen::Index>(arm);
    if (a >= post.mean.size()) throw InvalidInput("condition_on: arm out of range");
    double s = post.cov(a, a) + noise_var;
    if (s <= 0.0) s = kJitter;
    const Eigen::VectorXd k = post.cov.col(a);
    post.mean += k * ((y - post.mean(a)) / s);
    post.cov -= (k * k.transpose()) / s;
    post.cov = 0.5 * (post.cov + post.cov.transpose());
}

Posterior posterior(const GPBanditModel& model, const History& history) {
    Posterior post{model.mu, model.sigma};
    for (const auto& obs : history.steps) {
        if (obs.arm >= model.arms()) throw InvalidInput("posterior: arm out of range");
        const double sd = model.noise_sd(static_cast<Eigen::Index>(obs.arm));
        condition_on(post, obs.arm, obs.y, sd * sd);
    }
    return post;
}

std::size_t thompson_step(const GPBanditModel& model, const History& history, Rng& rng) {
    const Posterior post = posterior(model, history);
    const Eigen::VectorXd r_obs = GaussianSampler(post.mean, post.cov).draw(rng);
    const Eigen::VectorXd r_hid = GaussianSampler(model.hid_mean, model.hid_cov).draw(rng);
    return argmax_lowest(r_obs + r_hid);
}

std::size_t sample_obs_optimum(const GPBanditModel& model, const Eigen::VectorXd& r_obs, Rng& rng) {
    if (r_obs.size() != model.mu.size()) throw ShapeError("sample_obs_optimum: r_obs size");
    return argmax_lowest(r_obs + GaussianSampler(model.hid_mean, model.hid_cov).draw(rng));
}

RegretTrace run_episode(const GPBanditModel& model, std::size_t rounds, Rng& rng, Policy policy) {
    model.validate();
    const GaussianSampler prior_obs(model.mu, model.sigma);
    const GaussianSampler prior_hid(model.hid_mean, model.hid_cov);
    const Eigen::VectorXd r_obs = prior_obs.draw(rng);
    const Eigen::VectorXd r_hid = prior_hid.draw(rng);
    const Eigen::VectorXd r = r_obs + r_hid;
    const std::size_t best = argmax_lowest(r);

    RegretTrace trace;
    trace.arms.reserve(rounds);
    Posterior post{model.mu, model.sigma};
    double cum_obs = 0.0;
    double cum_true = 0.0;
    for (std::size_t n = 0; n < rounds; ++n) {
        std::size_t x = 0;
        if (policy == Policy::thompson) {
            const Eigen::VectorXd sample = GaussianSampler(post.mean, post.cov).draw(rng) + prior_hid.draw(rng);
            x = argmax_lowest(sample);
        } else {
            x = uniform_index(rng, model.arms());
        }
        const std::size_t obs_best = argmax_lowest(r_obs + prior_hid.draw(rng));
        const auto xi = static_cast<Eigen::Index>(x);
        const double reg_obs = r(static_cast<Eigen::Index>(obs_best)) - r(xi);
        const double reg_true = r(static_cast<Eigen::Index>(best)) - r(xi);
        cum_obs += reg_obs;
        cum_true += reg_true;
        trace.arms.push_back(x);
        trace.regret_obs.push_back(reg_obs);
        trace.regret_true.push_back(reg_true);
        trace.cum_obs.push_back(cum_obs);
        trace.cum_true.push_back(cum_true);
        trace.predictive_variance.push_back(std::max(0.0, post.cov(xi, xi)));

        const double sd = model.noise_sd(xi);
        const double y = r_obs(xi) + sd * standard_normal(rng);
        condition_on(post, x, y, sd * sd);
    }
    return trace;
}

double info_gain(const GPBanditModel& model, std::span<const std::size_t> arms) {
    Posterior post{model.mu, model.sigma};
    double total = 0.0;
    for (const std::size_t x : arms) {
        if (x >= model.arms()) throw InvalidInput("info_gain: arm out of range");
        const auto xi = static_cast<Eigen::Index>(x);
        const double var = model.noise_sd(xi) * model.noise_sd(xi);
        total += 0.5 * std::log1p(std::max(0.0, post.cov(xi, xi)) / var);
        // The mean is irrelevant to the variance recursion.
        condition_on(post, x, post.mean(xi), var);
    }
    return total;
}

double info_gain_from_counts(const GPBanditModel& model, std::span<const std::size_t> counts) {
    const auto n = static_cast<Eigen::Index>(model.arms());
    if (static_cast<Eigen::Index>(counts.size()) != n) throw ShapeError("info_gain_from_counts: one count per arm");
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i) = std::sqrt(static_cast<double>(counts[static_cast<std::size_t>(i)])) / model.noise_sd(i);
    }
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) + d.asDiagonal() * model.sigma * d.asDiagonal();
    return 0.5 * log_det_spd(a);
}

GammaReport max_info_gain(const GPBanditModel& model, std::size_t horizon, std::size_t exact_budget) {
    model.validate();
    const std::size_t arms = model.arms();
    GammaReport rep;

    rep.repetition_upper.resize(horizon + 1);
    for (std::size_t t = 0; t <= horizon; ++t) {
        double s = 0.0;
        for (std::size_t x = 0; x < arms; ++x) {
            const auto xi = static_cast<Eigen::Index>(x);
            const double var = model.noise_sd(xi) * model.noise_sd(xi);
            s += std::log1p(static_cast<double>(t) * model.sigma(xi, xi) / var);
        }
        rep.repetition_upper[t] = 0.5 * s;
    }

    rep.greedy_lower.assign(horizon + 1, 0.0);
    Posterior post{model.mu, model.sigma};
    for (std::size_t t = 1; t <= horizon; ++t) {
        std::size_t pick = 0;
        double best = -1.0;
        for (std::size_t x = 0; x < arms; ++x) {
            const auto xi = static_cast<Eigen::Index>(x);
            const double gain = std::max(0.0, post.cov(xi, xi)) / (model.noise_sd(xi) * model.noise_sd(xi));
            if (gain > best) {
                best = gain;
                pick = x;
            }
        }
        const auto pi = static_cast<Eigen::Index>(pick);
        rep.greedy_lower[t] = rep.greedy_lower[t - 1] + 0.5 * std::log1p(best);
        condition_on(post, pick, post.mean(pi), model.noise_sd(pi) * model.noise_sd(pi));
    }

    if (multiset_count(arms, horizon, exact_budget) > exact_budget) {
        rep.mode = GammaMode::greedy;
        return rep;
    }

    rep.mode = GammaMode::exact;
    rep.exact.assign(horizon + 1, 0.0);
    std::vector<std::size_t> counts(arms, 0);
    // Depth-first over count vectors with total <= horizon.
    auto visit = [&](auto&& self, std::size_t arm, std::size_t used) -> void {
        if (arm + 1 == arms) {
            for (std::size_t c = 0; c + used <= horizon; ++c) {
                counts[arm] = c;
                const double g = info_gain_from_counts(model, counts);
                auto& slot = rep.exact[used + c];
                slot = std::max(slot, g);
            }
            counts[arm] = 0;
            return;
        }
        for (std::size_t c = 0; c + used <= horizon; ++c) {
            counts[arm] = c;
            self(self, arm + 1, used + c);
        }
        counts[arm] = 0;
    };
    visit(visit, 0, 0);
    // The maximum over exactly t observations is nondecreasing in t, but
    // guard against rounding.
    for (std::size_t t = 1; t <= horizon; ++t) rep.exact[t] = std::max(rep.exact[t], rep.exact[t - 1]);
    return rep;
}

BoundIngredients bound_ingredients(const GPBanditModel& model) {
    const double n = static_cast<double>(model.arms());
    const double s = model.max_noise_sd();
    return {1.0 + std::sqrt(2.0 * std::log(2.0 * n) + 2.0), 2.0 / std::log1p(1.0 / (s * s))};
}

MeanWithError delta_estimate(const GPBanditModel& model, std::size_t draws, std::uint64_t seed, std::size_t threads) {
    model.validate();
    if (draws < 2) throw InvalidInput("delta_estimate: need at least 2 draws");
    const GaussianSampler prior_obs(model.mu, model.sigma);
    const GaussianSampler prior_hid(model.hid_mean, model.hid_cov);
    const std::size_t blocks = (draws + kBlock - 1) / kBlock;
    std::vector<Accumulator> partial(blocks);
    parallel_for(blocks, threads, [&](std::size_t b) {
        Rng rng = stream_rng(seed, {b});
        const std::size_t count = std::min(kBlock, draws - b * kBlock);
        for (std::size_t i = 0; i < count; ++i) {
            const Eigen::VectorXd r_obs = prior_obs.draw(rng);
            const Eigen::VectorXd r = r_obs + prior_hid.draw(rng);
            const std::size_t best = argmax_lowest(r);
            const std::size_t obs_best = argmax_lowest(r_obs + prior_hid.draw(rng));
            partial[b].add(r(static_cast<Eigen::Index>(best)) - r(static_cast<Eigen::Index>(obs_best)));
        }
    });
    Accumulator total;
    for (const auto& p : partial) total.merge(p);
    return total.summary();
}

BoundReport verify_bounds(const GPBanditModel& model, std::size_t horizon, std::size_t episodes, std::uint64_t seed,
                          const BoundOptions& options) {
    model.validate();
    if (horizon == 0) throw InvalidConfig("verify_bounds: horizon must be positive");
    if (episodes < 100) throw InvalidConfig("verify_bounds: need at least 100 episodes");

    BoundReport rep;
    rep.horizon = horizon;
    rep.episodes = episodes;
    const BoundIngredients ing = bound_ingredients(model);
    rep.beta = ing.beta;
    rep.c_sigma = ing.c_sigma;
    rep.delta = delta_estimate(model, options.delta_draws, derive_seed(seed, {0xde17a}), options.threads);

    const GammaReport gamma = max_info_gain(model, horizon);
    const std::vector<double>* g = &gamma.repetition_upper;
    if (options.gamma == GammaSource::exact) {
        if (gamma.mode != GammaMode::exact) throw UnsupportedMode("verify_bounds: exact gamma is not feasible here");
        g = &gamma.exact;
    }

    std::vector<RegretTrace> traces(episodes);
    parallel_for(episodes, options.threads, [&](std::size_t e) {
        Rng rng = stream_rng(seed, {e});
        traces[e] = run_episode(model, horizon, rng, options.policy);
    });

    rep.satisfied_obs = true;
    rep.satisfied_true = true;
    for (std::size_t t = 1; t <= horizon; ++t) {
        Accumulator cum_obs, cum_true, reg_obs, reg_true;
        for (const auto& tr : traces) {
            cum_obs.add(tr.cum_obs[t - 1]);
            cum_true.add(tr.cum_true[t - 1]);
            reg_obs.add(tr.regret_obs[t - 1]);
            reg_true.add(tr.regret_true[t - 1]);
        }
        const double gt = (*g)[t];
        const double b_obs = rep.beta * std::sqrt(rep.c_sigma * static_cast<double>(t) * gt);
        const double b_true = b_obs + static_cast<double>(t) * rep.delta.mean;
        rep.gamma.push_back(gt);
        rep.bound_obs.push_back(b_obs);
        rep.bound_true.push_back(b_true);
        rep.cum_regret_obs.push_back(cum_obs.summary());
        rep.cum_regret_true.push_back(cum_true.summary());
        rep.regret_obs.push_back(reg_obs.summary());
        rep.regret_true.push_back(reg_true.summary());
        rep.satisfied_obs = rep.satisfied_obs && rep.cum_regret_obs.back().mean <= b_obs;
        rep.satisfied_true = rep.satisfied_true && rep.cum_regret_true.back().mean <= b_true;
    }

    const std::size_t start = horizon - std::max<std::size_t>(1, horizon / 4);
    Accumulator tail;
    for (const auto& tr : traces) {
        double s = 0.0;
        for (std::size_t t = start; t < horizon; ++t) s += tr.regret_true[t];
        tail.add(s / static_cast<double>(horizon - start));
    }
    rep.last_quartile_regret_true = tail.summary();
    return rep;
}

DeviationReport deviation_check(const GPBanditModel& model, std::size_t draws, std::uint64_t seed, std::size_t threads) {
    model.validate();
    if (draws < 2) throw InvalidInput("deviation_check: need at least 2 draws");
    const GaussianSampler prior(model.mu, model.sigma);
    const std::size_t blocks = (draws + kBlock - 1) / kBlock;
    std::vector<std::array<Accumulator, 3>> partial(blocks);
    parallel_for(blocks, threads, [&](std::size_t b) {
        Rng rng = stream_rng(seed, {b});
        const std::size_t count = std::min(kBlock, draws - b * kBlock);
        for (std::size_t i = 0; i < count; ++i) {
            const Eigen::VectorXd r = prior.draw(rng);
            const Eigen::VectorXd r2 = prior.draw(rng);
            const auto x = static_cast<Eigen::Index>(argmax_lowest(r));
            partial[b][0].add(std::abs(r(x) - model.mu(x)));
            partial[b][1].add(std::abs(r(x) - r2(x)));
            partial[b][2].add(model.sigma(x, x));
        }
    });
    std::array<Accumulator, 3> total;
    for (const auto& p : partial) {
        for (std::size_t c = 0; c < 3; ++c) total[c].merge(p[c]);
    }
    DeviationReport rep;
    rep.center = total[0].summary();
    rep.pair = total[1].summary();
    rep.mean_variance = total[2].summary().mean;
    const double n = static_cast<double>(model.arms());
    const double root = std::sqrt(rep.mean_variance);
    rep.center_bound = std::sqrt(2.0 * std::log(2.0 * n) + 2.0) * root;
    rep.pair_bound = bound_ingredients(model).beta * root;
    rep.center_holds = rep.center.mean <= rep.center_bound + 2.0 * rep.center.standard_error;
    rep.pair_holds = rep.pair.mean <= rep.pair_bound + 2.0 * rep.pair.standard_error;
    return rep;
}

void write_regret_csv(std::ostream& out, const BoundReport& report) {
    out << "round,regret_obs,regret_true,cum_obs,cum_true\n";
    char buf[160];
    for (std::size_t t = 0; t < report.horizon; ++t) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", t + 1, report.regret_obs[t].mean,
                      report.regret_true[t].mean, report.cum_regret_obs[t].mean, report.cum_regret_true[t].mean);
        out << buf;
    }
}

}  // namespace envagent
