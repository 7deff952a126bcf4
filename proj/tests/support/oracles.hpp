#pragma once

// Brute-force reference computations that the unit tests compare against.

#include "envagent/bandit.hpp"
#include "envagent/env_model.hpp"
#include "envagent/estimators.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace envagent::oracle {

inline BehaviorTable table(std::vector<Symbol> outputs, std::uint64_t id = 0) {
    return BehaviorTable{std::move(outputs), id};
}

inline TestSuite suite(const std::vector<std::size_t>& inputs, const std::vector<Symbol>& expected,
                       std::uint64_t id = 0) {
    TestSuite t;
    t.id = id;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        TestCase c{inputs[k], {}};
        if (k < expected.size()) c.expected = expected[k];
        t.cases.push_back(c);
    }
    return t;
}

inline TestSuite input_only_suite(const std::vector<std::size_t>& inputs, std::uint64_t id = 0) {
    return suite(inputs, {}, id);
}

/// 1/2 log det(I + N^-1 K) for the Gram block K of the observed arm sequence.
inline double logdet_info_gain(const GPBanditModel& model, const std::vector<std::size_t>& arms) {
    const auto t = static_cast<Eigen::Index>(arms.size());
    if (t == 0) return 0.0;
    // I + N^-1/2 K N^-1/2 has the same determinant as I + N^-1 K.
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(t, t);
    for (Eigen::Index i = 0; i < t; ++i) {
        for (Eigen::Index j = 0; j < t; ++j) {
            s(i, j) += model.sigma(arms[i], arms[j]) / (model.noise_sd(arms[i]) * model.noise_sd(arms[j]));
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    const Eigen::MatrixXd l = llt.matrixL();
    return l.diagonal().array().log().sum();
}

/// Joint-Gaussian conditioning in one shot: mu + K_xs (K_ss + N)^-1 (y - mu_s).
inline Posterior joint_conditioning(const GPBanditModel& model, const History& history) {
    const auto n = static_cast<Eigen::Index>(history.steps.size());
    if (n == 0) return {model.mu, model.sigma};
    const auto a = static_cast<Eigen::Index>(model.arms());
    Eigen::MatrixXd kss(n, n);
    Eigen::MatrixXd kxs(a, n);
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t xi = history.steps[i].arm;
        resid(i) = history.steps[i].y - model.mu(xi);
        for (Eigen::Index j = 0; j < n; ++j) kss(i, j) = model.sigma(xi, history.steps[j].arm);
        kss(i, i) += model.noise_sd(xi) * model.noise_sd(xi);
        for (Eigen::Index x = 0; x < a; ++x) kxs(x, i) = model.sigma(x, xi);
    }
    const Eigen::LDLT<Eigen::MatrixXd> solver(kss);
    return {model.mu + kxs * solver.solve(resid), model.sigma - kxs * solver.solve(kxs.transpose())};
}

/// Best total probability over all k-subsets.
inline double best_subset_value(const std::vector<double>& probs, std::size_t k) {
    const std::size_t n = probs.size();
    double best = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) v += probs[i];
        }
        best = std::max(best, v);
    }
    return best;
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
    double p1 = 0.0;
};

inline Moments brute_moments(const std::vector<ScoreAtom>& atoms) {
    Moments m;
    for (const auto& a : atoms) {
        m.mean += a.score * a.probability;
        if (a.score == 1.0) m.p1 += a.probability;
    }
    for (const auto& a : atoms) m.variance += (a.score - m.mean) * (a.score - m.mean) * a.probability;
    return m;
}

/// P[argmax(r_obs + h) = i] for independent h_x ~ N(0, var_x), by quadrature.
inline std::vector<double> argmax_law_diagonal(const std::vector<double>& r_obs, const std::vector<double>& var) {
    const std::size_t n = r_obs.size();
    std::vector<double> p(n, 0.0);
    auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); };
    auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    constexpr int kSteps = 20000;
    constexpr double kLo = -10.0;
    constexpr double kHi = 10.0;
    const double h = (kHi - kLo) / kSteps;
    for (std::size_t i = 0; i < n; ++i) {
        const double sd_i = std::sqrt(var[i]);
        double acc = 0.0;
        for (int s = 0; s <= kSteps; ++s) {
            const double z = kLo + h * s;
            const double v = r_obs[i] + sd_i * z;
            double f = phi(z);
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) f *= cdf((v - r_obs[j]) / std::sqrt(var[j]));
            }
            acc += (s == 0 || s == kSteps) ? 0.5 * f : f;
        }
        p[i] = acc * h;
    }
    return p;
}

}  // namespace envagent::oracle
