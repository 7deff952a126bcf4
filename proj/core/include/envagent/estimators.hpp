#pragma once

// Signal-to-noise diagnostics for the smooth (mean agreement) and sharp
// (all suites identical) similarity estimators.

#include "envagent/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace envagent {

struct ScoreAtom {
    double score = 0.0;
    double probability = 0.0;
};

/// Law of the single-suite similarity score Z, given as a finite atom list.
/// Moments are computed exactly from the (dyadic) atom values.
class ScoreDistribution {
public:
    static ScoreDistribution from_atoms(std::vector<ScoreAtom> atoms);

    [[nodiscard]] const std::vector<ScoreAtom>& atoms() const { return atoms_; }
    [[nodiscard]] double mu() const { return to_double(mu_); }
    [[nodiscard]] double p1() const { return to_double(p1_); }
    [[nodiscard]] const Rational& mu_exact() const { return mu_; }
    [[nodiscard]] const Rational& p1_exact() const { return p1_; }
    [[nodiscard]] const Rational& variance_exact() const { return variance_; }

    /// Inverse-CDF draw of one score.
    [[nodiscard]] double sample(Rng& rng) const;

private:
    std::vector<ScoreAtom> atoms_;
    std::vector<double> cdf_;
    Rational mu_;
    Rational p1_;
    Rational variance_;
};

template <class T>
struct SnrReportT {
    T mu{};
    T p1{};
    unsigned m = 1;
    T snr_smooth{};
    /// Sharp SNR with the true p1 = P[Z = 1].
    T snr_sharp{};
    /// Sharp SNR with p1 replaced by its upper bound mu.
    T snr_sharp_mu{};
    T ratio{};
    T lower_bound_mu_dependent{};
    T lower_bound_uniform{};
};

using SnrReport = SnrReportT<double>;
using ExactSnrReport = SnrReportT<Rational>;

/// Closed-form SNRs in exact arithmetic. Throws DegenerateDistribution when
/// Var(Z) = 0, mu is not in (0, 1), or p1 is 0 or 1.
ExactSnrReport snr_exact_rational(const ScoreDistribution& dist, unsigned m);
SnrReport snr_exact(const ScoreDistribution& dist, unsigned m);

/// m (1/mu)^(m-1) (1 - mu^m) / (1 - mu).
double snr_lower_bound(double mu, unsigned m);
Rational snr_lower_bound(const Rational& mu, unsigned m);

/// Resamples both estimators `replicates` times. Replicates are grouped in
/// fixed blocks with one rng stream per block.
SnrReport snr_empirical(const ScoreDistribution& dist, unsigned m, std::size_t replicates, std::uint64_t seed,
                        std::size_t threads = 1);

struct JensenProbe {
    double empirical_mean = 0.0;  // E[(mean of m draws)^s]
    double true_power = 0.0;      // mu^s
    double standard_error = 0.0;
    /// empirical_mean >= true_power - 3 SE
    bool consistent = false;
};

JensenProbe jensen_bias_probe(const ScoreDistribution& dist, unsigned m, unsigned s, std::size_t replicates,
                              std::uint64_t seed, std::size_t threads = 1);

/// Columns: mu,p1,m,snr_smooth,snr_sharp,ratio,bound_mu,bound_m2
void write_snr_csv_header(std::ostream& out);
void append_snr_csv_row(std::ostream& out, const SnrReport& r);

}  // namespace envagent
