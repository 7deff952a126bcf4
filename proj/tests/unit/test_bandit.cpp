#include "envagent/bandit.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace envagent;

namespace {

GPBanditModel iid_model(std::size_t arms, double noise_sd, double hid_var = 0.0) {
    GPBanditModel m;
    const auto n = static_cast<Eigen::Index>(arms);
    m.mu = Eigen::VectorXd::Zero(n);
    m.sigma = Eigen::MatrixXd::Identity(n, n);
    m.hid_mean = Eigen::VectorXd::Zero(n);
    m.hid_cov = hid_var * Eigen::MatrixXd::Identity(n, n);
    m.noise_sd = Eigen::VectorXd::Constant(n, noise_sd);
    return m;
}

}  // namespace

TEST(Posterior, EmptyHistoryIsPrior) {
    const GPBanditModel m = GPBanditModel::line_graph(5, 2.0, 0.5, 0.25);
    const Posterior p = posterior(m, History{});
    EXPECT_EQ(p.mean, m.mu);
    EXPECT_EQ(p.cov, m.sigma);
}

TEST(Posterior, TwoArmScalarUpdate) {
    const GPBanditModel m = iid_model(2, 1.0);
    const Posterior p = posterior(m, History{{{0, 1.0}}});
    EXPECT_NEAR(p.mean(0), 0.5, 1e-15);
    EXPECT_NEAR(p.mean(1), 0.0, 1e-15);
    EXPECT_NEAR(p.cov(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(p.cov(1, 1), 1.0, 1e-15);
}

TEST(Posterior, NoiselessLimitInterpolates) {
    GPBanditModel m = GPBanditModel::line_graph(3, 1.5, 1e-6, 0.0);
    const Posterior p = posterior(m, History{{{1, 0.7}}});
    EXPECT_NEAR(p.mean(1), 0.7, 1e-9);
    EXPECT_NEAR(p.cov(1, 1), 0.0, 1e-9);
}

TEST(Posterior, MatchesJointConditioning) {
    GPBanditModel m = GPBanditModel::line_graph(6, 1.7, 0.4, 0.0);
    m.noise_sd << 0.2, 0.4, 0.6, 0.3, 0.5, 0.9;
    m.mu << 0.1, -0.2, 0.3, 0.0, 0.5, -0.4;
    Rng rng = stream_rng(101);
    History h;
    for (int t = 0; t < 25; ++t) {
        h.steps.push_back({uniform_index(rng, 6), std::normal_distribution<double>(0.0, 1.0)(rng)});
        const Posterior seq = posterior(m, h);
        const Posterior joint = oracle::joint_conditioning(m, h);
        EXPECT_LT((seq.mean - joint.mean).cwiseAbs().maxCoeff(), 1e-8) << "t=" << t;
        EXPECT_LT((seq.cov - joint.cov).cwiseAbs().maxCoeff(), 1e-8) << "t=" << t;
        EXPECT_EQ(seq.cov, seq.cov.transpose());
    }
}

TEST(ThompsonStep, DegeneratePosteriorPicksArgmax) {
    GPBanditModel m = iid_model(2, 0.5);
    m.mu << 0.0, 1.0;
    m.sigma.setZero();
    Rng rng = stream_rng(102);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(thompson_step(m, History{}, rng), 1u);
}

TEST(ThompsonStep, KnownRewardsWithoutHiddenPart) {
    GPBanditModel m = iid_model(4, 0.5);
    m.mu << 0.3, -1.0, 0.9, 0.2;
    m.sigma.setZero();
    Rng rng = stream_rng(103);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(thompson_step(m, History{}, rng), 2u);
}

TEST(ThompsonStep, ExchangeablePriorIsUniform) {
    const GPBanditModel m = iid_model(8, 0.5, 0.25);
    Rng rng = stream_rng(104);
    constexpr int kDraws = 100000;
    std::vector<int> counts(8, 0);
    for (int i = 0; i < kDraws; ++i) ++counts[thompson_step(m, History{}, rng)];
    const double p = 1.0 / 8.0;
    const double sd = std::sqrt(kDraws * p * (1 - p));
    for (int c : counts) EXPECT_NEAR(c, kDraws * p, 3.0 * sd);
}

TEST(ArgmaxLowest, TiesGoToLowestIndex) {
    Eigen::VectorXd v(4);
    v << 1.0, 3.0, 3.0, 2.0;
    EXPECT_EQ(argmax_lowest(v), 1u);
}

TEST(SampleObsOptimum, NoHiddenRewardMeansArgmax) {
    const GPBanditModel m = iid_model(3, 0.5, 0.0);
    Eigen::VectorXd r(3);
    r << 0.1, 0.4, -0.3;
    Rng rng = stream_rng(105);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_obs_optimum(m, r, rng), 1u);
}

TEST(SampleObsOptimum, ExchangeableHiddenOverEqualRewardsIsUniform) {
    const GPBanditModel m = iid_model(4, 0.5, 1.0);
    const Eigen::VectorXd r = Eigen::VectorXd::Constant(4, 0.2);
    Rng rng = stream_rng(106);
    constexpr int kDraws = 40000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < kDraws; ++i) ++counts[sample_obs_optimum(m, r, rng)];
    const double sd = std::sqrt(kDraws * 0.25 * 0.75);
    for (int c : counts) EXPECT_NEAR(c, kDraws * 0.25, 3.0 * sd);
}

TEST(SampleObsOptimum, MatchesNumericIntegration) {
    GPBanditModel m = iid_model(3, 0.5, 0.0);
    m.hid_cov.diagonal() << 1.0, 0.5, 2.0;
    const std::vector<double> r{0.0, 0.3, -0.2};
    const auto law = oracle::argmax_law_diagonal(r, {1.0, 0.5, 2.0});
    EXPECT_NEAR(law[0] + law[1] + law[2], 1.0, 1e-8);

    Eigen::VectorXd rv(3);
    rv << r[0], r[1], r[2];
    Rng rng = stream_rng(107);
    constexpr int kDraws = 100000;
    std::vector<int> counts(3, 0);
    for (int i = 0; i < kDraws; ++i) ++counts[sample_obs_optimum(m, rv, rng)];
    for (int x = 0; x < 3; ++x) {
        const double sd = std::sqrt(law[x] * (1 - law[x]) / kDraws);
        EXPECT_NEAR(counts[x] / double(kDraws), law[x], 3.0 * sd) << "arm " << x;
    }
}

TEST(RunEpisode, ZeroRoundsGiveEmptyTrace) {
    Rng rng = stream_rng(108);
    const RegretTrace t = run_episode(GPBanditModel::line_graph(4, 2.0, 0.5, 0.25), 0, rng);
    EXPECT_TRUE(t.arms.empty());
    EXPECT_TRUE(t.regret_true.empty());
}

TEST(RunEpisode, SeededAndPrefixSummed) {
    const GPBanditModel m = GPBanditModel::line_graph(8, 2.0, 0.5, 0.25);
    Rng r1 = stream_rng(109);
    Rng r2 = stream_rng(109);
    const RegretTrace a = run_episode(m, 40, r1);
    const RegretTrace b = run_episode(m, 40, r2);
    EXPECT_EQ(a.arms, b.arms);
    EXPECT_EQ(a.regret_true, b.regret_true);
    double obs = 0.0, tru = 0.0;
    for (std::size_t t = 0; t < a.arms.size(); ++t) {
        obs += a.regret_obs[t];
        tru += a.regret_true[t];
        EXPECT_EQ(a.cum_obs[t], obs);
        EXPECT_EQ(a.cum_true[t], tru);
    }
}

TEST(RunEpisode, NoAmbiguityAndNearNoiselessConverges) {
    const GPBanditModel m = GPBanditModel::line_graph(8, 2.0, 1e-3, 0.0);
    double tail = 0.0;
    constexpr int kEpisodes = 100;
    for (int e = 0; e < kEpisodes; ++e) {
        Rng rng = stream_rng(110, {static_cast<std::uint64_t>(e)});
        const RegretTrace t = run_episode(m, 60, rng);
        tail += t.regret_true.back();
    }
    EXPECT_LT(tail / kEpisodes, 1e-3);
}

TEST(InfoGain, EmptySequence) {
    EXPECT_EQ(info_gain(iid_model(3, 1.0), {}), 0.0);
}

TEST(InfoGain, SingleObservation) {
    const std::vector<std::size_t> arms{0};
    EXPECT_NEAR(info_gain(iid_model(1, 1.0), arms), 0.5 * std::log(2.0), 1e-15);
    EXPECT_NEAR(info_gain(iid_model(1, 1.0), arms), 0.346574, 1e-6);
}

TEST(InfoGain, MatchesLogDetOracle) {
    GPBanditModel m = GPBanditModel::line_graph(6, 2.5, 0.5, 0.0);
    m.noise_sd << 0.3, 0.5, 0.7, 0.4, 0.6, 0.5;
    Rng rng = stream_rng(111);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<std::size_t> arms(1 + uniform_index(rng, 30));
        for (auto& a : arms) a = uniform_index(rng, 6);
        const double direct = oracle::logdet_info_gain(m, arms);
        EXPECT_NEAR(info_gain(m, arms), direct, 1e-9);
        std::vector<std::size_t> counts(6, 0);
        for (auto a : arms) ++counts[a];
        EXPECT_NEAR(info_gain_from_counts(m, counts), direct, 1e-9);
    }
}

TEST(InfoGain, PermutationInvariant) {
    const GPBanditModel m = GPBanditModel::line_graph(5, 1.5, 0.5, 0.0);
    std::vector<std::size_t> arms{0, 3, 3, 1, 4, 0, 2};
    const double ref = info_gain(m, arms);
    std::sort(arms.begin(), arms.end());
    do {
        EXPECT_NEAR(info_gain(m, arms), ref, 1e-9);
    } while (std::next_permutation(arms.begin(), arms.end()));
}

TEST(MaxInfoGain, ZeroHorizon) {
    const GammaReport g = max_info_gain(iid_model(3, 1.0), 0);
    EXPECT_EQ(g.mode, GammaMode::exact);
    EXPECT_EQ(g.exact.at(0), 0.0);
}

TEST(MaxInfoGain, OneArmTwoRounds) {
    const GammaReport g = max_info_gain(iid_model(1, 1.0), 2);
    // The second observation sees posterior variance 1/2.
    EXPECT_NEAR(g.exact.at(2), 0.5 * std::log(2.0) + 0.5 * std::log(1.0 + 0.5), 1e-12);
    EXPECT_NEAR(g.exact.at(2), oracle::logdet_info_gain(iid_model(1, 1.0), {0, 0}), 1e-12);
}

TEST(MaxInfoGain, GreedyNeverExceedsExactNorExactTheSurrogate) {
    for (std::size_t arms = 1; arms <= 4; ++arms) {
        for (double ls : {0.5, 1.5, 4.0}) {
            const GPBanditModel m = GPBanditModel::line_graph(arms, ls, 0.5, 0.0);
            const GammaReport g = max_info_gain(m, 4);
            ASSERT_EQ(g.mode, GammaMode::exact);
            for (std::size_t t = 0; t <= 4; ++t) {
                EXPECT_LE(g.greedy_lower[t], g.exact[t] + 1e-12);
                EXPECT_LE(g.exact[t], g.repetition_upper[t] + 1e-12);
                if (t > 0) EXPECT_GE(g.exact[t], g.exact[t - 1]);
            }
        }
    }
}

TEST(MaxInfoGain, LargeInstancesReportOnlyTheBracket) {
    const GammaReport g = max_info_gain(GPBanditModel::line_graph(32, 2.0, 0.5, 0.0), 50);
    EXPECT_EQ(g.mode, GammaMode::greedy);
    EXPECT_TRUE(g.exact.empty());
    for (std::size_t t = 0; t <= 50; ++t) EXPECT_LE(g.greedy_lower[t], g.repetition_upper[t] + 1e-12);
}

TEST(BoundIngredients, Examples) {
    const BoundIngredients two = bound_ingredients(iid_model(2, 1.0));
    EXPECT_NEAR(two.beta, 1.0 + std::sqrt(2.0 * std::log(4.0) + 2.0), 1e-14);
    EXPECT_NEAR(two.beta, 3.18465, 1e-4);
    EXPECT_NEAR(two.c_sigma, 2.0 / std::log(2.0), 1e-14);
    EXPECT_NEAR(two.c_sigma, 2.885390, 1e-6);

    double prev = bound_ingredients(iid_model(2, 1.0)).c_sigma;
    for (double s : {0.5, 0.1, 0.01, 0.001}) {
        const double c = bound_ingredients(iid_model(2, s)).c_sigma;
        EXPECT_GT(c, 0.0);
        EXPECT_LT(c, prev);
        prev = c;
    }
}

TEST(DeltaEstimate, ZeroWithoutHiddenReward) {
    const MeanWithError d = delta_estimate(GPBanditModel::line_graph(8, 2.0, 0.5, 0.0), 20000, 112);
    EXPECT_EQ(d.mean, 0.0);
}

TEST(DeltaEstimate, PureHiddenRewardIsPositive) {
    GPBanditModel m = iid_model(4, 0.5, 1.0);
    m.sigma.setZero();
    EXPECT_GT(delta_estimate(m, 20000, 113).mean, 0.0);
}

TEST(DeltaEstimate, TwoArmClosedForm) {
    GPBanditModel m = iid_model(2, 0.5, 1.0);
    m.sigma.setZero();
    const MeanWithError d = delta_estimate(m, 200000, 114);
    const double exact = 1.0 / std::sqrt(M_PI);
    EXPECT_NEAR(d.mean, exact, 0.01 * exact);
    EXPECT_NEAR(d.mean, exact, 4.0 * d.standard_error);
}

TEST(VerifyBounds, NoHiddenRewardCollapsesBothBounds) {
    BoundOptions o;
    o.delta_draws = 10000;
    const BoundReport r = verify_bounds(GPBanditModel::line_graph(8, 2.0, 0.5, 0.0), 30, 200, 115, o);
    EXPECT_EQ(r.delta.mean, 0.0);
    EXPECT_EQ(r.bound_obs, r.bound_true);
    EXPECT_TRUE(r.satisfied_obs);
    EXPECT_TRUE(r.satisfied_true);
}

TEST(VerifyBounds, ThreadCountDoesNotChangeReport) {
    const GPBanditModel m = GPBanditModel::line_graph(8, 2.0, 0.5, 0.25);
    BoundOptions o;
    o.delta_draws = 10000;
    const BoundReport a = verify_bounds(m, 20, 120, 116, o);
    o.threads = 3;
    const BoundReport b = verify_bounds(m, 20, 120, 116, o);
    std::ostringstream sa, sb;
    write_regret_csv(sa, a);
    write_regret_csv(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(a.delta.mean, b.delta.mean);
}

TEST(VerifyBounds, TooFewEpisodesRejected) {
    EXPECT_THROW(verify_bounds(GPBanditModel::line_graph(4, 2.0, 0.5, 0.0), 10, 50, 117), InvalidConfig);
}

TEST(VerifyBounds, UniformPolicyViolatesBoundOnSpreadPrior) {
    GPBanditModel m = iid_model(8, 0.5);
    m.mu = Eigen::VectorXd::LinSpaced(8, -2.0, 2.0);
    BoundOptions o;
    o.policy = Policy::uniform_random;
    o.delta_draws = 10000;
    const BoundReport r = verify_bounds(m, 400, 100, 118, o);
    EXPECT_FALSE(r.satisfied_obs);

    o.policy = Policy::thompson;
    EXPECT_TRUE(verify_bounds(m, 400, 100, 118, o).satisfied_obs);
}

TEST(DeviationBound, SingleArmIsFoldedNormal) {
    const DeviationReport r = deviation_check(iid_model(1, 1.0), 100000, 119);
    EXPECT_NEAR(r.center.mean, std::sqrt(2.0 / M_PI), 3.0 * r.center.standard_error);
    EXPECT_TRUE(r.center_holds);
    EXPECT_TRUE(r.pair_holds);
}

TEST(DeviationBound, HoldsForSeveralArmCounts) {
    for (std::size_t arms : {2u, 8u, 32u}) {
        const DeviationReport r = deviation_check(iid_model(arms, 1.0), 100000, 120 + arms);
        EXPECT_TRUE(r.center_holds) << arms;
        EXPECT_TRUE(r.pair_holds) << arms;
    }
}

TEST(DeviationBound, ScalingThePriorLeavesRatiosUnchanged) {
    GPBanditModel unit = iid_model(8, 1.0);
    GPBanditModel scaled = unit;
    scaled.sigma *= 0.25;
    const DeviationReport a = deviation_check(unit, 50000, 121);
    const DeviationReport b = deviation_check(scaled, 50000, 121);
    EXPECT_NEAR(a.center.mean / a.center_bound, b.center.mean / b.center_bound, 1e-9);
    EXPECT_NEAR(a.pair.mean / a.pair_bound, b.pair.mean / b.pair_bound, 1e-9);
}

TEST(GaussianSampler, HandlesSingularCovariance) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Ones(3, 3);
    GaussianSampler s(Eigen::VectorXd::Zero(3), cov);
    Rng rng = stream_rng(122);
    for (int i = 0; i < 10; ++i) {
        const Eigen::VectorXd v = s.draw(rng);
        EXPECT_NEAR(v(0), v(1), 1e-9);
        EXPECT_NEAR(v(1), v(2), 1e-9);
    }
}

TEST(Model, RejectsInvalidPriors) {
    GPBanditModel m = iid_model(2, 0.5);
    m.sigma(0, 0) = 1.5;
    EXPECT_THROW(m.validate(), InvalidConfig);
    m = iid_model(2, 0.5);
    m.noise_sd(1) = 0.0;
    EXPECT_THROW(m.validate(), InvalidConfig);
}

TEST(RegretCsv, Schema) {
    BoundOptions o;
    o.delta_draws = 1000;
    const BoundReport r = verify_bounds(GPBanditModel::line_graph(4, 2.0, 0.5, 0.0), 5, 100, 123, o);
    std::ostringstream out;
    write_regret_csv(out, r);
    const std::string text = out.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "round,regret_obs,regret_true,cum_obs,cum_true");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 6);
}
