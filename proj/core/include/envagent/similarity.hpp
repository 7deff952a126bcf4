#pragma once

// Functional similarity between programs under a distribution of test
// suites: exact and Monte Carlo similarity, sharpened similarity,
// equivalence, Gram matrices, and fuzzy-neighborhood measures.

#include "envagent/common.hpp"
#include "envagent/env_model.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace envagent {

/// Sharpness exponent s in {1, 2, ...} or infinity. Infinity is its own
/// variant, distinct from any large finite exponent such as 10^9.
class Sharpness {
public:
    static Sharpness finite(unsigned exponent);
    static Sharpness infinite() { return Sharpness(0, true); }

    [[nodiscard]] bool is_infinite() const { return infinite_; }
    [[nodiscard]] unsigned exponent() const;
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const Sharpness&, const Sharpness&) = default;

private:
    Sharpness(unsigned exponent, bool infinite) : exponent_(exponent), infinite_(infinite) {}
    unsigned exponent_;
    bool infinite_;
};

/// Enumerable p(t). Weights are normalized by their sum when measures are
/// evaluated, so the diagonal of any similarity is exactly 1.
struct SuiteDistribution {
    std::vector<TestSuite> suites;
    std::vector<double> weights;

    static SuiteDistribution uniform(std::vector<TestSuite> suites);
    void validate() const;
};

/// Enumerable p(c).
struct CodeDistribution {
    std::vector<BehaviorTable> codes;
    std::vector<double> weights;

    static CodeDistribution uniform(std::vector<BehaviorTable> codes);
    void validate() const;
};

struct GramMatrix {
    Eigen::MatrixXd entries;
    Sharpness sharpness = Sharpness::finite(1);
    std::vector<std::uint64_t> code_ids;
};

struct PsdVerdict {
    bool psd = false;
    double min_eigenvalue = 0.0;
};

struct SmoothingGap {
    double gap = 0.0;
    double bound = 0.0;
    double epsilon = 0.0;
    /// Decided exactly as gap^2 <= 2 * epsilon in rational arithmetic.
    bool holds = false;
};

/// Number of cases on which two output vectors agree.
std::size_t agreement_count(const OutputVector& a, const OutputVector& b);

double similarity_exact(const BehaviorTable& c1, const BehaviorTable& c2, const SuiteDistribution& dist,
                        const Environment& e);
Rational similarity_exact_rational(const BehaviorTable& c1, const BehaviorTable& c2,
                                   const SuiteDistribution& dist, const Environment& e);

/// Mean per-suite agreement fraction over the given suites.
double similarity_mc(const BehaviorTable& c1, const BehaviorTable& c2, std::span<const TestSuite> suites,
                     const Environment& e);

double s_power(double sim, Sharpness s);
Rational s_power(const Rational& sim, Sharpness s);

/// 1 iff the programs produce identical outputs on every case of every
/// suite with positive weight.
int equivalence(const BehaviorTable& c1, const BehaviorTable& c2, const SuiteDistribution& dist,
                const Environment& e);

GramMatrix gram(std::span<const BehaviorTable> codes, const SuiteDistribution& dist, Sharpness s,
                const Environment& e, std::size_t threads = 1);

/// Throws InvalidInput when `g` is not exactly symmetric.
PsdVerdict psd_check(const Eigen::MatrixXd& g, double tol = 1e-8);

double neighborhood_measure_exact(const BehaviorTable& c, const CodeDistribution& codes,
                                  const SuiteDistribution& dist, Sharpness s, const Environment& e);
Rational neighborhood_measure_exact_rational(const BehaviorTable& c, const CodeDistribution& codes,
                                             const SuiteDistribution& dist, Sharpness s, const Environment& e);

/// p_hat_{n,m}: average sharpened Monte Carlo similarity of `c` to n sampled
/// programs, each similarity estimated on the m sampled suites.
double neighborhood_measure_mc(const BehaviorTable& c, std::span<const BehaviorTable> code_samples,
                               std::span<const TestSuite> suite_samples, Sharpness s, const Environment& e);

/// |p(N_c^s) - p(N_c'^s)| against sqrt(2 eps) with eps = 1 - sim^s(c, c').
SmoothingGap smoothing_gap(const BehaviorTable& c, const BehaviorTable& c_prime, Sharpness s,
                           const CodeDistribution& codes, const SuiteDistribution& dist, const Environment& e);

/// Row-major CSV with a header of code ids.
void write_gram_csv(std::ostream& out, const GramMatrix& g);

}  // namespace envagent
