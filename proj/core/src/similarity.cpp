#include "envagent/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace envagent {

namespace {

constexpr double kWeightSumTolerance = 1e-12;

void validate_weights(std::size_t items, const std::vector<double>& weights, const char* what) {
    if (items == 0) throw InvalidInput(std::string(what) + " is empty");
    if (weights.size() != items) throw InvalidInput(std::string(what) + ": weights and support differ in length");
    CompensatedSum total;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput(std::string(what) + ": negative or non-finite weight");
        total.add(w);
    }
    if (std::abs(total.value() - 1.0) > kWeightSumTolerance) {
        throw InvalidInput(std::string(what) + ": weights do not sum to 1");
    }
}

void require_deterministic(const Environment& e) {
    e.validate();
    if (!e.deterministic()) throw InvalidInput("exact similarity requires a deterministic environment");
}

/// Outputs of one program on every suite of a distribution.
std::vector<OutputVector> outputs_on(const BehaviorTable& c, std::span<const TestSuite> suites, const Environment& e) {
    std::vector<OutputVector> out;
    out.reserve(suites.size());
    for (const auto& t : suites) out.push_back(execute(c, t, e));
    return out;
}

double weighted_agreement(const std::vector<OutputVector>& a, const std::vector<OutputVector>& b,
                          const SuiteDistribution& dist) {
    CompensatedSum num;
    CompensatedSum den;
    for (std::size_t j = 0; j < dist.suites.size(); ++j) {
        const double w = dist.weights[j];
        if (w == 0.0) continue;
        const auto agree = static_cast<double>(agreement_count(a[j], b[j]));
        num.add(w * (agree / static_cast<double>(a[j].size())));
        den.add(w);
    }
    return num.value() / den.value();
}

Rational weighted_agreement_rational(const std::vector<OutputVector>& a, const std::vector<OutputVector>& b,
                                     const SuiteDistribution& dist) {
    Rational num = 0;
    Rational den = 0;
    for (std::size_t j = 0; j < dist.suites.size(); ++j) {
        if (dist.weights[j] == 0.0) continue;
        const Rational w = to_rational(dist.weights[j]);
        num += w * Rational(static_cast<long long>(agreement_count(a[j], b[j])),
                            static_cast<long long>(a[j].size()));
        den += w;
    }
    return num / den;
}

}  // namespace

Sharpness Sharpness::finite(unsigned exponent) {
    if (exponent == 0) throw InvalidInput("sharpness exponent must be at least 1");
    return Sharpness(exponent, false);
}

unsigned Sharpness::exponent() const {
    if (infinite_) throw InvalidInput("infinite sharpness has no finite exponent");
    return exponent_;
}

std::string Sharpness::to_string() const { return infinite_ ? "inf" : std::to_string(exponent_); }

SuiteDistribution SuiteDistribution::uniform(std::vector<TestSuite> suites) {
    SuiteDistribution d;
    d.weights.assign(suites.size(), suites.empty() ? 0.0 : 1.0 / static_cast<double>(suites.size()));
    d.suites = std::move(suites);
    return d;
}

void SuiteDistribution::validate() const {
    validate_weights(suites.size(), weights, "suite distribution");
    for (const auto& t : suites) {
        if (t.cases.empty()) throw InvalidInput("suite distribution contains an empty suite");
    }
}

CodeDistribution CodeDistribution::uniform(std::vector<BehaviorTable> codes) {
    CodeDistribution d;
    d.weights.assign(codes.size(), codes.empty() ? 0.0 : 1.0 / static_cast<double>(codes.size()));
    d.codes = std::move(codes);
    return d;
}

void CodeDistribution::validate() const { validate_weights(codes.size(), weights, "code distribution"); }

std::size_t agreement_count(const OutputVector& a, const OutputVector& b) {
    if (a.size() != b.size()) throw ShapeError("output vectors differ in length");
    std::size_t n = 0;
    for (std::size_t k = 0; k < a.size(); ++k) n += a[k] == b[k] ? 1 : 0;
    return n;
}

double similarity_exact(const BehaviorTable& c1, const BehaviorTable& c2, const SuiteDistribution& dist,
                        const Environment& e) {
    dist.validate();
    require_deterministic(e);
    return weighted_agreement(outputs_on(c1, dist.suites, e), outputs_on(c2, dist.suites, e), dist);
}

Rational similarity_exact_rational(const BehaviorTable& c1, const BehaviorTable& c2,
                                   const SuiteDistribution& dist, const Environment& e) {
    dist.validate();
    require_deterministic(e);
    return weighted_agreement_rational(outputs_on(c1, dist.suites, e), outputs_on(c2, dist.suites, e), dist);
}

double similarity_mc(const BehaviorTable& c1, const BehaviorTable& c2, std::span<const TestSuite> suites,
                     const Environment& e) {
    if (suites.empty()) throw InvalidInput("similarity_mc needs at least one suite");
    require_deterministic(e);
    CompensatedSum sum;
    for (const auto& t : suites) {
        if (t.cases.empty()) throw InvalidInput("similarity_mc: empty suite");
        const auto agree = agreement_count(execute(c1, t, e), execute(c2, t, e));
        sum.add(static_cast<double>(agree) / static_cast<double>(t.size()));
    }
    return sum.value() / static_cast<double>(suites.size());
}

double s_power(double sim, Sharpness s) {
    if (!(sim >= 0.0 && sim <= 1.0)) throw InvalidInput("similarity must lie in [0, 1]");
    if (s.is_infinite()) return sim == 1.0 ? 1.0 : 0.0;
    return std::pow(sim, static_cast<double>(s.exponent()));
}

Rational s_power(const Rational& sim, Sharpness s) {
    if (sim < 0 || sim > 1) throw InvalidInput("similarity must lie in [0, 1]");
    if (s.is_infinite()) return sim == 1 ? Rational(1) : Rational(0);
    Rational out = 1;
    for (unsigned k = 0; k < s.exponent(); ++k) out *= sim;
    return out;
}

int equivalence(const BehaviorTable& c1, const BehaviorTable& c2, const SuiteDistribution& dist,
                const Environment& e) {
    dist.validate();
    require_deterministic(e);
    for (std::size_t j = 0; j < dist.suites.size(); ++j) {
        if (dist.weights[j] <= 0.0) continue;
        if (execute(c1, dist.suites[j], e) != execute(c2, dist.suites[j], e)) return 0;
    }
    return 1;
}

GramMatrix gram(std::span<const BehaviorTable> codes, const SuiteDistribution& dist, Sharpness s,
                const Environment& e, std::size_t threads) {
    dist.validate();
    require_deterministic(e);
    const std::size_t n = codes.size();
    std::vector<std::vector<OutputVector>> outputs(n);
    parallel_for(n, threads, [&](std::size_t i) { outputs[i] = outputs_on(codes[i], dist.suites, e); });

    GramMatrix g;
    g.sharpness = s;
    g.entries.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto& c : codes) g.code_ids.push_back(c.id);
    // Each row of the upper triangle is written by exactly one worker.
    parallel_for(n, threads, [&](std::size_t i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = s_power(weighted_agreement(outputs[i], outputs[j], dist), s);
            g.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    });
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            g.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                g.entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        }
    }
    return g;
}

PsdVerdict psd_check(const Eigen::MatrixXd& g, double tol) {
    if (g.rows() != g.cols()) throw InvalidInput("psd_check: matrix is not square");
    if (g.rows() == 0) throw InvalidInput("psd_check: empty matrix");
    if (g != g.transpose()) throw InvalidInput("psd_check: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw InvalidInput("psd_check: eigen-solver failed");
    const double lambda_min = solver.eigenvalues().minCoeff();
    return PsdVerdict{lambda_min >= -tol, lambda_min};
}

double neighborhood_measure_exact(const BehaviorTable& c, const CodeDistribution& codes,
                                  const SuiteDistribution& dist, Sharpness s, const Environment& e) {
    codes.validate();
    dist.validate();
    require_deterministic(e);
    const auto oc = outputs_on(c, dist.suites, e);
    CompensatedSum num;
    CompensatedSum den;
    for (std::size_t i = 0; i < codes.codes.size(); ++i) {
        const double w = codes.weights[i];
        if (w == 0.0) continue;
        num.add(w * s_power(weighted_agreement(oc, outputs_on(codes.codes[i], dist.suites, e), dist), s));
        den.add(w);
    }
    return num.value() / den.value();
}

Rational neighborhood_measure_exact_rational(const BehaviorTable& c, const CodeDistribution& codes,
                                             const SuiteDistribution& dist, Sharpness s, const Environment& e) {
    codes.validate();
    dist.validate();
    require_deterministic(e);
    const auto oc = outputs_on(c, dist.suites, e);
    Rational num = 0;
    Rational den = 0;
    for (std::size_t i = 0; i < codes.codes.size(); ++i) {
        if (codes.weights[i] == 0.0) continue;
        const Rational w = to_rational(codes.weights[i]);
        num += w * s_power(weighted_agreement_rational(oc, outputs_on(codes.codes[i], dist.suites, e), dist), s);
        den += w;
    }
    return num / den;
}

double neighborhood_measure_mc(const BehaviorTable& c, std::span<const BehaviorTable> code_samples,
                               std::span<const TestSuite> suite_samples, Sharpness s, const Environment& e) {
    if (code_samples.empty()) throw InvalidInput("neighborhood_measure_mc needs at least one program sample");
    CompensatedSum sum;
    for (const auto& ci : code_samples) sum.add(s_power(similarity_mc(c, ci, suite_samples, e), s));
    return sum.value() / static_cast<double>(code_samples.size());
}

SmoothingGap smoothing_gap(const BehaviorTable& c, const BehaviorTable& c_prime, Sharpness s,
                           const CodeDistribution& codes, const SuiteDistribution& dist, const Environment& e) {
    const Rational eps = 1 - s_power(similarity_exact_rational(c, c_prime, dist, e), s);
    const Rational pc = neighborhood_measure_exact_rational(c, codes, dist, s, e);
    const Rational pc_prime = neighborhood_measure_exact_rational(c_prime, codes, dist, s, e);
    const Rational gap = abs(pc - pc_prime);

    SmoothingGap out;
    out.gap = to_double(gap);
    out.epsilon = to_double(eps);
    out.bound = std::sqrt(2.0 * out.epsilon);
    out.holds = gap * gap <= 2 * eps;
    return out;
}

void write_gram_csv(std::ostream& out, const GramMatrix& g) {
    for (std::size_t j = 0; j < g.code_ids.size(); ++j) out << (j ? "," : "") << g.code_ids[j];
    out << '\n';
    char buf[32];
    for (Eigen::Index i = 0; i < g.entries.rows(); ++i) {
        for (Eigen::Index j = 0; j < g.entries.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", g.entries(i, j));
            out << (j ? "," : "") << buf;
        }
        out << '\n';
    }
}

}  // namespace envagent
