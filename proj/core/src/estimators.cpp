#include "envagent/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace envagent {

namespace {

constexpr std::size_t kBlock = 4096;

Rational rational_pow(const Rational& x, unsigned k) {
    Rational out = 1;
    for (unsigned i = 0; i < k; ++i) out *= x;
    return out;
}

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;

    void merge(const Moments& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        count += o.count;
    }
    [[nodiscard]] double mean() const { return sum / static_cast<double>(count); }
    [[nodiscard]] double variance() const {
        const double n = static_cast<double>(count);
        return std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
    }
};

/// Runs `body(rng, replicate_count)` per block and merges block moments in
/// block order.
template <class Body>
std::vector<Moments> blocked(std::size_t replicates, std::uint64_t seed, std::size_t threads, std::size_t channels,
                             Body body) {
    const std::size_t blocks = (replicates + kBlock - 1) / kBlock;
    std::vector<std::vector<Moments>> partial(blocks, std::vector<Moments>(channels));
    parallel_for(blocks, threads, [&](std::size_t b) {
        Rng rng = stream_rng(seed, {b});
        const std::size_t count = std::min(kBlock, replicates - b * kBlock);
        body(rng, count, partial[b]);
    });
    std::vector<Moments> total(channels);
    for (const auto& p : partial) {
        for (std::size_t c = 0; c < channels; ++c) total[c].merge(p[c]);
    }
    return total;
}

}  // namespace

ScoreDistribution ScoreDistribution::from_atoms(std::vector<ScoreAtom> atoms) {
    if (atoms.empty()) throw InvalidInput("score distribution needs at least one atom");
    ScoreDistribution d;
    Rational total = 0;
    Rational second = 0;
    d.mu_ = 0;
    d.p1_ = 0;
    double running = 0.0;
    for (const auto& a : atoms) {
        if (!(a.score >= 0.0 && a.score <= 1.0)) throw InvalidInput("score atoms must lie in [0, 1]");
        if (!(a.probability >= 0.0)) throw InvalidInput("atom probabilities must be nonnegative");
        const Rational s = to_rational(a.score);
        const Rational p = to_rational(a.probability);
        total += p;
        d.mu_ += s * p;
        second += s * s * p;
        if (a.score == 1.0) d.p1_ += p;
        running += a.probability;
        d.cdf_.push_back(running);
    }
    if (abs(total - 1) > Rational(1, 1000000000000LL)) throw InvalidInput("atom probabilities must sum to 1");
    d.mu_ /= total;
    d.p1_ /= total;
    d.variance_ = second / total - d.mu_ * d.mu_;
    d.atoms_ = std::move(atoms);
    return d;
}

double ScoreDistribution::sample(Rng& rng) const {
    const double u = uniform01(rng) * cdf_.back();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto k = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(),
                                                                      static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
    return atoms_[k].score;
}

Rational snr_lower_bound(const Rational& mu, unsigned m) {
    if (mu <= 0 || mu >= 1) throw InvalidInput("snr_lower_bound: mu must lie in (0, 1)");
    if (m == 0) throw InvalidInput("snr_lower_bound: m must be at least 1");
    return Rational(m) / rational_pow(mu, m - 1) * (1 - rational_pow(mu, m)) / (1 - mu);
}

double snr_lower_bound(double mu, unsigned m) {
    if (!(mu > 0.0 && mu < 1.0)) throw InvalidInput("snr_lower_bound: mu must lie in (0, 1)");
    if (m == 0) throw InvalidInput("snr_lower_bound: m must be at least 1");
    return static_cast<double>(m) * std::pow(1.0 / mu, static_cast<double>(m - 1)) *
           (1.0 - std::pow(mu, static_cast<double>(m))) / (1.0 - mu);
}

ExactSnrReport snr_exact_rational(const ScoreDistribution& dist, unsigned m) {
    if (m == 0) throw InvalidInput("snr_exact: m must be at least 1");
    const Rational& mu = dist.mu_exact();
    const Rational& p1 = dist.p1_exact();
    const Rational& var = dist.variance_exact();
    if (mu <= 0 || mu >= 1) throw DegenerateDistribution("snr_exact: mu must lie in (0, 1)");
    if (var <= 0) throw DegenerateDistribution("snr_exact: Var(Z) is zero");
    if (p1 <= 0 || p1 >= 1) throw DegenerateDistribution("snr_exact: P[Z = 1] must lie in (0, 1)");

    ExactSnrReport r;
    r.mu = mu;
    r.p1 = p1;
    r.m = m;
    r.snr_smooth = Rational(m) * mu * mu / var;
    const Rational p1m = rational_pow(p1, m);
    r.snr_sharp = p1m / (1 - p1m);
    const Rational mum = rational_pow(mu, m);
    r.snr_sharp_mu = mum / (1 - mum);
    r.ratio = r.snr_smooth / r.snr_sharp;
    r.lower_bound_mu_dependent = snr_lower_bound(mu, m);
    r.lower_bound_uniform = Rational(m) * Rational(m);
    return r;
}

SnrReport snr_exact(const ScoreDistribution& dist, unsigned m) {
    const ExactSnrReport q = snr_exact_rational(dist, m);
    SnrReport r;
    r.mu = to_double(q.mu);
    r.p1 = to_double(q.p1);
    r.m = m;
    r.snr_smooth = to_double(q.snr_smooth);
    r.snr_sharp = to_double(q.snr_sharp);
    r.snr_sharp_mu = to_double(q.snr_sharp_mu);
    r.ratio = to_double(q.ratio);
    r.lower_bound_mu_dependent = to_double(q.lower_bound_mu_dependent);
    r.lower_bound_uniform = to_double(q.lower_bound_uniform);
    return r;
}

SnrReport snr_empirical(const ScoreDistribution& dist, unsigned m, std::size_t replicates, std::uint64_t seed,
                        std::size_t threads) {
    if (m == 0) throw InvalidInput("snr_empirical: m must be at least 1");
    if (replicates < 2) throw InvalidInput("snr_empirical: need at least 2 replicates");
    const auto moments = blocked(replicates, seed, threads, 2, [&](Rng& rng, std::size_t count, std::vector<Moments>& acc) {
        for (std::size_t r = 0; r < count; ++r) {
            double sum = 0.0;
            bool all_one = true;
            for (unsigned j = 0; j < m; ++j) {
                const double z = dist.sample(rng);
                sum += z;
                all_one = all_one && z == 1.0;
            }
            const double smooth = sum / static_cast<double>(m);
            const double sharp = all_one ? 1.0 : 0.0;
            acc[0].sum += smooth;
            acc[0].sum_sq += smooth * smooth;
            acc[1].sum += sharp;
            acc[1].sum_sq += sharp;
            ++acc[0].count;
            ++acc[1].count;
        }
    });
    const double var_smooth = moments[0].variance();
    const double var_sharp = moments[1].variance();
    if (var_smooth == 0.0 || var_sharp == 0.0) {
        throw DegenerateDistribution("snr_empirical: an estimator showed zero sample variance");
    }

    SnrReport r;
    r.mu = dist.mu();
    r.p1 = dist.p1();
    r.m = m;
    r.snr_smooth = moments[0].mean() * moments[0].mean() / var_smooth;
    r.snr_sharp = moments[1].mean() * moments[1].mean() / var_sharp;
    const double mum = std::pow(r.mu, static_cast<double>(m));
    r.snr_sharp_mu = mum / (1.0 - mum);
    r.ratio = r.snr_smooth / r.snr_sharp;
    r.lower_bound_mu_dependent = snr_lower_bound(r.mu, m);
    r.lower_bound_uniform = static_cast<double>(m) * static_cast<double>(m);
    return r;
}

JensenProbe jensen_bias_probe(const ScoreDistribution& dist, unsigned m, unsigned s, std::size_t replicates,
                              std::uint64_t seed, std::size_t threads) {
    if (m == 0 || s == 0) throw InvalidInput("jensen_bias_probe: m and s must be at least 1");
    if (replicates < 2) throw InvalidInput("jensen_bias_probe: need at least 2 replicates");
    const auto moments = blocked(replicates, seed, threads, 1, [&](Rng& rng, std::size_t count, std::vector<Moments>& acc) {
        for (std::size_t r = 0; r < count; ++r) {
            double sum = 0.0;
            for (unsigned j = 0; j < m; ++j) sum += dist.sample(rng);
            const double v = std::pow(sum / static_cast<double>(m), static_cast<double>(s));
            acc[0].sum += v;
            acc[0].sum_sq += v * v;
            ++acc[0].count;
        }
    });
    JensenProbe p;
    p.empirical_mean = moments[0].mean();
    p.true_power = std::pow(dist.mu(), static_cast<double>(s));
    p.standard_error = std::sqrt(moments[0].variance() / static_cast<double>(moments[0].count));
    p.consistent = p.empirical_mean >= p.true_power - 3.0 * p.standard_error;
    return p;
}

void write_snr_csv_header(std::ostream& out) { out << "mu,p1,m,snr_smooth,snr_sharp,ratio,bound_mu,bound_m2\n"; }

void append_snr_csv_row(std::ostream& out, const SnrReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%u,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.mu, r.p1, r.m, r.snr_smooth,
                  r.snr_sharp, r.ratio, r.lower_bound_mu_dependent, r.lower_bound_uniform);
    out << buf;
}

}  // namespace envagent
