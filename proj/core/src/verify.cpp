#include "envagent/verify.hpp"

#include "envagent/bandit.hpp"
#include "envagent/csv.hpp"
#include "envagent/estimators.hpp"
#include "envagent/experiment.hpp"
#include "envagent/refine.hpp"
#include "envagent/selector.hpp"
#include "envagent/similarity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace envagent {

namespace {

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

std::string num(double x) { return format_double(x); }

// ---------------------------------------------------------------------------
// Random enumerable worlds for the kernel and smoothing checks.

struct World {
    std::vector<BehaviorTable> codes;
    std::vector<double> code_weights;
    SuiteDistribution dist;
    Environment env;
    Description desc;
};

std::vector<double> random_weights(Rng& rng, std::size_t n) {
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& x : w) {
        x = static_cast<double>(1 + uniform_index(rng, 16));
        total += x;
    }
    for (auto& x : w) x /= total;
    return w;
}

World random_world(Rng& rng, std::size_t max_codes, std::size_t max_suites) {
    World w;
    const std::size_t domain = 2 + uniform_index(rng, 7);
    const std::size_t alphabet = 2 + uniform_index(rng, 3);
    const double ambiguity = 0.25 * static_cast<double>(uniform_index(rng, 3));
    const AlgorithmSpec alg = sample_algorithm(domain, alphabet, ambiguity, rng);
    w.desc = sample_description(alg, false, rng);

    // A small behavior pool makes exact duplicates (and so nontrivial
    // equivalence classes) common.
    std::vector<BehaviorTable> pool;
    const std::size_t pool_size = 1 + uniform_index(rng, 6);
    for (std::size_t i = 0; i < pool_size; ++i) pool.push_back(sample_program(w.desc, 0.7, rng));
    const std::size_t n = 1 + uniform_index(rng, max_codes);
    for (std::size_t i = 0; i < n; ++i) {
        BehaviorTable c = uniform01(rng) < 0.3 ? sample_program(w.desc, 0.7, rng) : pool[uniform_index(rng, pool.size())];
        c.id = i;
        w.codes.push_back(std::move(c));
    }
    w.code_weights = random_weights(rng, n);

    const std::size_t m = 1 + uniform_index(rng, max_suites);
    for (std::size_t j = 0; j < m; ++j) {
        SuiteOptions opts;
        opts.id = j;
        w.dist.suites.push_back(sample_test_suite(w.desc, 1 + uniform_index(rng, domain), 0.2, rng, opts));
    }
    w.dist.weights = random_weights(rng, m);
    w.env = uniform01(rng) < 0.5 ? Environment::binary() : Environment::generalized(alphabet);
    return w;
}

// ---------------------------------------------------------------------------
// 1. Kernel axioms

struct KernelRow {
    std::size_t codes = 0;
    std::size_t suites = 0;
    double min_eigenvalue = 0.0;
    bool symmetric = true;
    bool unit_diagonal = true;
    bool in_range = true;
    bool psd = true;
    bool limit_matches = true;
    bool limit_law = true;
    bool partition = true;
};

KernelRow kernel_instance(Rng& rng) {
    const World w = random_world(rng, 32, 8);
    KernelRow row;
    row.codes = w.codes.size();
    row.suites = w.dist.suites.size();
    row.min_eigenvalue = 1.0;
    const std::size_t n = w.codes.size();

    std::vector<std::vector<int>> eq(n, std::vector<int>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) eq[i][j] = equivalence(w.codes[i], w.codes[j], w.dist, w.env);
    }

    for (const Sharpness s : {Sharpness::finite(1), Sharpness::finite(2), Sharpness::finite(5), Sharpness::infinite()}) {
        const GramMatrix g = gram(w.codes, w.dist, s, w.env);
        row.symmetric = row.symmetric && g.entries == g.entries.transpose();
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            row.unit_diagonal = row.unit_diagonal && g.entries(ii, ii) == 1.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double v = g.entries(ii, static_cast<Eigen::Index>(j));
                row.in_range = row.in_range && v >= 0.0 && v <= 1.0;
                if (s.is_infinite()) row.limit_matches = row.limit_matches && v == static_cast<double>(eq[i][j]);
            }
        }
        if (row.symmetric) {
            const PsdVerdict v = psd_check(g.entries);
            row.psd = row.psd && v.psd;
            row.min_eigenvalue = std::min(row.min_eigenvalue, v.min_eigenvalue);
        }
    }

    // Large finite exponents approach the equivalence indicator.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double sim = similarity_exact(w.codes[i], w.codes[j], w.dist, w.env);
            if (sim >= 1.0) {
                row.limit_law = row.limit_law && eq[i][j] == 1;
                continue;
            }
            const double big = sim <= 0.0 ? 1.0 : std::ceil(std::log(1e-9) / std::log(sim));
            const double p = s_power(sim, Sharpness::finite(static_cast<unsigned>(std::min(big, 4e9))));
            // At the ceiling the true power can equal 1e-9 exactly (sim = 0.1),
            // so allow a few ulps for pow().
            row.limit_law = row.limit_law && std::abs(p - eq[i][j]) <= 1e-9 * (1.0 + 1e-13);
        }
    }

    for (std::size_t a = 0; a < n; ++a) {
        row.partition = row.partition && eq[a][a] == 1;
        for (std::size_t b = 0; b < n; ++b) {
            row.partition = row.partition && eq[a][b] == eq[b][a];
            for (std::size_t c = 0; c < n; ++c) {
                if (eq[a][b] && eq[b][c]) row.partition = row.partition && eq[a][c] == 1;
            }
        }
    }
    return row;
}

CheckResult check_kernel(const VerifyOptions& o) {
    const std::size_t instances = o.smoke ? 40 : 1000;
    std::vector<KernelRow> rows(instances);
    parallel_for(instances, o.threads, [&](std::size_t i) {
        Rng rng = stream_rng(o.seed, {1, i});
        rows[i] = kernel_instance(rng);
    });
    std::ostringstream csv;
    CsvWriter w(csv, {"instance", "codes", "suites", "min_eigenvalue", "symmetric", "unit_diagonal", "in_range", "psd",
                      "limit_matches", "limit_law", "partition"});
    std::size_t failures = 0;
    double worst = 1.0;
    for (std::size_t i = 0; i < instances; ++i) {
        const auto& r = rows[i];
        const bool ok = r.symmetric && r.unit_diagonal && r.in_range && r.psd && r.limit_matches && r.limit_law &&
                        r.partition;
        failures += ok ? 0 : 1;
        worst = std::min(worst, r.min_eigenvalue);
        auto b = [](bool x) { return std::string(x ? "1" : "0"); };
        w.row({std::to_string(i), std::to_string(r.codes), std::to_string(r.suites), num(r.min_eigenvalue),
               b(r.symmetric), b(r.unit_diagonal), b(r.in_range), b(r.psd), b(r.limit_matches), b(r.limit_law),
               b(r.partition)});
    }
    return {"kernel", 1, failures == 0,
            fmt("%zu instances, %zu failing, min eigenvalue %.3g", instances, failures, worst), csv.str()};
}

// ---------------------------------------------------------------------------
// 2. Measure smoothing

CheckResult check_smoothing(const VerifyOptions& o) {
    const std::size_t instances = o.smoke ? 40 : 500;
    std::vector<SmoothingGap> gaps(instances);
    std::vector<std::string> labels(instances);
    parallel_for(instances, o.threads, [&](std::size_t i) {
        Rng rng = stream_rng(o.seed, {2, i});
        const World w = random_world(rng, 8, 6);
        CodeDistribution codes{w.codes, w.code_weights};
        const BehaviorTable c = w.codes[uniform_index(rng, w.codes.size())];
        BehaviorTable cp = c;
        if (uniform01(rng) < 0.5) {
            // Close neighbor: one changed input.
            const std::size_t at = uniform_index(rng, cp.outputs.size());
            cp.outputs[at] = static_cast<Symbol>((cp.outputs[at] + 1) % w.desc.alphabet_size);
        } else {
            cp = sample_program(w.desc, 0.7, rng);
        }
        static const Sharpness choices[] = {Sharpness::finite(1), Sharpness::finite(2), Sharpness::finite(3),
                                            Sharpness::finite(8), Sharpness::infinite()};
        const Sharpness s = choices[uniform_index(rng, 5)];
        gaps[i] = smoothing_gap(c, cp, s, codes, w.dist, w.env);
        labels[i] = s.to_string();
    });
    std::ostringstream csv;
    CsvWriter w(csv, {"instance", "s", "gap", "bound", "epsilon", "holds"});
    std::size_t violations = 0;
    double tightest = 0.0;
    for (std::size_t i = 0; i < instances; ++i) {
        const auto& g = gaps[i];
        violations += g.holds ? 0 : 1;
        if (g.bound > 0.0) tightest = std::max(tightest, g.gap / g.bound);
        w.row({std::to_string(i), labels[i], num(g.gap), num(g.bound), num(g.epsilon), g.holds ? "1" : "0"});
    }
    return {"smoothing", 2, violations == 0,
            fmt("%zu instances, %zu violations, max gap/bound %.4f", instances, violations, tightest), csv.str()};
}

// ---------------------------------------------------------------------------
// 3. SNR dominance

std::vector<ScoreAtom> two_atoms(double mu) { return {{1.0, mu}, {0.0, 1.0 - mu}}; }

std::vector<ScoreAtom> three_atoms(double mu) {
    const double q = mu * (1.0 - mu);
    const double p1 = mu - q / 2.0;
    return {{1.0, p1}, {0.5, q}, {0.0, 1.0 - p1 - q}};
}

CheckResult check_snr(const VerifyOptions& o) {
    const std::size_t replicates = o.smoke ? 20'000 : 100'000;
    struct Case {
        std::string label;
        ScoreDistribution dist;
        unsigned m;
        bool empirical;
    };
    std::vector<Case> cases;
    for (const double mu : {0.1, 0.2, 0.5, 0.8, 0.95}) {
        for (const unsigned m : {1u, 2u, 5u, 10u}) {
            for (int shape = 0; shape < 2; ++shape) {
                auto d = ScoreDistribution::from_atoms(shape == 0 ? two_atoms(mu) : three_atoms(mu));
                // The sharp estimator is only measurable when its success
                // probability is neither tiny nor near one.
                const double p = std::pow(d.p1(), static_cast<double>(m));
                cases.push_back({fmt("%s mu=%g", shape == 0 ? "two-atom" : "three-atom", mu), std::move(d), m,
                                 p >= 0.1 && p <= 0.9});
            }
        }
    }
    cases.push_back({"example {1:.5,0:.5}", ScoreDistribution::from_atoms({{1.0, 0.5}, {0.0, 0.5}}), 1, true});
    cases.push_back({"example {1:.5,0:.5}", ScoreDistribution::from_atoms({{1.0, 0.5}, {0.0, 0.5}}), 4, true});
    cases.push_back(
        {"example {1:.25,.75:.5,0:.25}", ScoreDistribution::from_atoms({{1.0, 0.25}, {0.75, 0.5}, {0.0, 0.25}}), 2, true});

    std::vector<SnrReport> empirical(cases.size());
    parallel_for(cases.size(), o.threads, [&](std::size_t i) {
        if (cases[i].empirical) {
            empirical[i] = snr_empirical(cases[i].dist, cases[i].m, replicates, derive_seed(o.seed, {3, i}));
        }
    });

    std::ostringstream csv;
    CsvWriter w(csv, {"case", "mu", "p1", "m", "snr_smooth", "snr_sharp", "ratio", "bound_mu", "bound_m2",
                      "exact_ok", "emp_snr_smooth", "emp_snr_sharp", "emp_ok"});
    std::size_t exact_fail = 0;
    std::size_t emp_fail = 0;
    std::size_t emp_count = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        const ExactSnrReport q = snr_exact_rational(c.dist, c.m);
        const bool exact_ok = q.ratio >= q.lower_bound_mu_dependent && q.lower_bound_mu_dependent >= q.lower_bound_uniform;
        exact_fail += exact_ok ? 0 : 1;
        const SnrReport d = snr_exact(c.dist, c.m);
        std::string es = "", eh = "", eok = "";
        if (c.empirical) {
            ++emp_count;
            const auto& e = empirical[i];
            const bool ok = std::abs(e.snr_smooth / d.snr_smooth - 1.0) < 0.05 &&
                            std::abs(e.snr_sharp / d.snr_sharp - 1.0) < 0.05;
            emp_fail += ok ? 0 : 1;
            es = num(e.snr_smooth);
            eh = num(e.snr_sharp);
            eok = ok ? "1" : "0";
        }
        w.row({c.label, num(d.mu), num(d.p1), std::to_string(c.m), num(d.snr_smooth), num(d.snr_sharp), num(d.ratio),
               num(d.lower_bound_mu_dependent), num(d.lower_bound_uniform), exact_ok ? "1" : "0", es, eh, eok});
    }
    return {"snr", 3, exact_fail == 0 && emp_fail == 0,
            fmt("%zu exact cases (%zu failing), %zu empirical cases within 5%% (%zu failing)", cases.size(),
                exact_fail, emp_count, emp_fail),
            csv.str()};
}

// ---------------------------------------------------------------------------
// 4. Greedy Pass@k

CheckResult check_passk(const VerifyOptions& o) {
    const std::size_t reps = o.smoke ? 3 : 20;
    struct Inst {
        std::size_t classes, k, rep;
    };
    std::vector<Inst> insts;
    for (std::size_t n = 1; n <= 12; ++n) {
        for (std::size_t k = 1; k <= std::min<std::size_t>(6, n); ++k) {
            for (std::size_t r = 0; r < reps; ++r) insts.push_back({n, k, r});
        }
    }
    std::vector<GreedyOptimality> out(insts.size());
    parallel_for(insts.size(), o.threads, [&](std::size_t i) {
        Rng rng = stream_rng(o.seed, {4, i});
        // Coarse integer masses make ties frequent.
        std::vector<double> probs(insts[i].classes);
        double total = 0.0;
        for (auto& p : probs) {
            p = static_cast<double>(uniform_index(rng, 6));
            total += p;
        }
        if (total == 0.0) {
            probs.assign(probs.size(), 1.0);
            total = static_cast<double>(probs.size());
        }
        for (auto& p : probs) p /= total;
        out[i] = greedy_optimality_check(probs, insts[i].k);
    });
    std::ostringstream csv;
    CsvWriter w(csv, {"classes", "k", "rep", "greedy_value", "best_value", "optimal"});
    std::size_t failures = 0;
    for (std::size_t i = 0; i < insts.size(); ++i) {
        failures += out[i].optimal ? 0 : 1;
        w.row({std::to_string(insts[i].classes), std::to_string(insts[i].k), std::to_string(insts[i].rep),
               out[i].greedy_value.str(), out[i].best_value.str(), out[i].optimal ? "1" : "0"});
    }
    return {"passk", 4, failures == 0, fmt("%zu instances, %zu non-optimal", insts.size(), failures), csv.str()};
}

// ---------------------------------------------------------------------------
// 5. Calibration duality

CheckResult check_calibration(const VerifyOptions& o) {
    const std::size_t instances = o.smoke ? 20 : 200;
    std::vector<Rational> gaps(instances);
    std::vector<Rational> mispaired(instances);
    parallel_for(instances, o.threads, [&](std::size_t i) {
        Rng rng = stream_rng(o.seed, {5, i});
        const std::size_t domain = 3 + uniform_index(rng, 6);
        const AlgorithmSpec alg = sample_algorithm(domain, 2 + uniform_index(rng, 3), 0.25, rng);
        const std::size_t classes = 1 + uniform_index(rng, 6);
        const CalibratedFamily fam = make_calibrated_family(alg, classes, 1 + uniform_index(rng, 4), rng);
        const Environment e = Environment::binary();
        gaps[i] = calibration_check(fam.codes, fam.suites, e);
        // Control: point mass on the truth against the same suites.
        CodeDistribution point{{BehaviorTable{alg.truth, 0}}, {1.0}};
        mispaired[i] = calibration_check(point, fam.suites, e);
    });
    std::ostringstream csv;
    CsvWriter w(csv, {"instance", "max_gap", "mispaired_gap"});
    std::size_t nonzero = 0;
    std::size_t control_positive = 0;
    for (std::size_t i = 0; i < instances; ++i) {
        nonzero += gaps[i] == 0 ? 0 : 1;
        control_positive += mispaired[i] > 0 ? 1 : 0;
        w.row({std::to_string(i), gaps[i].str(), mispaired[i].str()});
    }
    return {"calibration", 5, nonzero == 0,
            fmt("%zu families, %zu with nonzero gap; control mis-pairing positive in %zu", instances, nonzero,
                control_positive),
            csv.str()};
}

// ---------------------------------------------------------------------------
// 6. Soft beats hard

CheckResult check_selection(const VerifyOptions& o) {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::selection;
    cfg.seeds = {0, 1, 2, 3, 4};
    for (auto& s : cfg.seeds) s = derive_seed(o.seed, {6, s});
    cfg.parallel = o.threads;
    cfg.selection.tasks = o.smoke ? 20 : 200;
    cfg.selection.heuristics = {Heuristic::Random, Heuristic::MaxPassHard, Heuristic::MaxPassSoft, Heuristic::CodeTHard,
                                Heuristic::CodeTSoft};
    const std::string raw = selection_csv(cfg);

    std::istringstream in(raw);
    const CsvTable t = read_csv(in);
    const std::size_t cs = t.column("seed"), ch = t.column("heuristic"), cp = t.column("pass_at_1");
    std::map<std::string, std::map<std::string, double>> mean;  // seed -> heuristic -> mean
    for (const auto& r : t.rows) mean[r[cs]][r[ch]] += std::stod(r[cp]) / static_cast<double>(cfg.selection.tasks);

    std::ostringstream csv;
    CsvWriter w(csv, {"seed", "Random", "MaxPassHard", "MaxPassSoft", "CodeTHard", "CodeTSoft"});
    std::size_t codet_soft_wins = 0, maxpass_soft_wins = 0, beat_random = 0;
    for (const auto seed : cfg.seeds) {
        auto& m = mean[std::to_string(seed)];
        codet_soft_wins += m["CodeTSoft"] >= m["CodeTHard"] ? 1 : 0;
        maxpass_soft_wins += m["MaxPassSoft"] >= m["MaxPassHard"] ? 1 : 0;
        const double r = m["Random"];
        beat_random +=
            (m["CodeTSoft"] > r && m["CodeTHard"] > r && m["MaxPassSoft"] > r && m["MaxPassHard"] > r) ? 1 : 0;
        w.row({std::to_string(seed), num(r), num(m["MaxPassHard"]), num(m["MaxPassSoft"]), num(m["CodeTHard"]),
               num(m["CodeTSoft"])});
    }
    const std::size_t seeds = cfg.seeds.size();
    const bool ok = codet_soft_wins >= seeds - 1 && maxpass_soft_wins >= seeds - 1 && beat_random == seeds;
    return {"selection", 6, ok,
            fmt("CodeTSoft>=CodeTHard on %zu/%zu seeds, MaxPassSoft>=MaxPassHard on %zu/%zu, all beat Random on %zu/%zu",
                codet_soft_wins, seeds, maxpass_soft_wins, seeds, beat_random, seeds),
            csv.str()};
}

// ---------------------------------------------------------------------------
// 7. Regret bounds

constexpr double kReferenceLengthscale = 2.0;
constexpr double kReferenceNoise = 0.5;

CheckResult check_regret(const VerifyOptions& o) {
    const std::size_t episodes = o.smoke ? 100 : 500;
    const std::size_t horizon = 50;
    std::ostringstream csv;
    CsvWriter w(csv, {"hid_var", "round", "cum_regret_obs", "bound_obs", "cum_regret_true", "bound_true"});
    bool ok = true;
    std::string detail;
    for (const double hid : {0.25, 0.0}) {
        const GPBanditModel model = GPBanditModel::line_graph(8, kReferenceLengthscale, kReferenceNoise, hid);
        BoundOptions bo;
        bo.threads = o.threads;
        bo.delta_draws = o.smoke ? 20'000 : 200'000;
        const BoundReport r = verify_bounds(model, horizon, episodes, derive_seed(o.seed, {7}), bo);
        for (std::size_t t = 0; t < horizon; ++t) {
            w.row({num(hid), std::to_string(t + 1), num(r.cum_regret_obs[t].mean), num(r.bound_obs[t]),
                   num(r.cum_regret_true[t].mean), num(r.bound_true[t])});
        }
        const auto& lq = r.last_quartile_regret_true;
        bool floor_ok = true;
        if (hid > 0.0) {
            const double se = std::hypot(lq.standard_error, r.delta.standard_error);
            floor_ok = lq.mean >= r.delta.mean - 2.0 * se;
            detail += fmt("hid=0.25: bounds %s/%s, last-quartile regret %.4f vs delta %.4f (SE %.4f); ",
                          r.satisfied_obs ? "ok" : "VIOLATED", r.satisfied_true ? "ok" : "VIOLATED", lq.mean,
                          r.delta.mean, se);
        } else {
            floor_ok = lq.mean < 0.05;
            detail += fmt("hid=0: bounds %s/%s, last-quartile regret %.4f (< 0.05 required)",
                          r.satisfied_obs ? "ok" : "VIOLATED", r.satisfied_true ? "ok" : "VIOLATED", lq.mean);
        }
        ok = ok && r.satisfied_obs && r.satisfied_true && floor_ok;
    }
    return {"regret", 7, ok, detail, csv.str()};
}

// ---------------------------------------------------------------------------
// 8. Posterior chain and deviation bounds

double log_det_oracle(const GPBanditModel& model, const std::vector<std::size_t>& arms) {
    const auto t = static_cast<Eigen::Index>(arms.size());
    Eigen::MatrixXd a(t, t);
    for (Eigen::Index i = 0; i < t; ++i) {
        const auto xi = static_cast<Eigen::Index>(arms[static_cast<std::size_t>(i)]);
        const double inv = 1.0 / (model.noise_sd(xi) * model.noise_sd(xi));
        for (Eigen::Index j = 0; j < t; ++j) {
            a(i, j) = inv * model.sigma(xi, static_cast<Eigen::Index>(arms[static_cast<std::size_t>(j)]));
        }
        a(i, i) += 1.0;
    }
    // The matrix is similar to a symmetric positive definite one, so its
    // determinant is positive; PartialPivLU handles the asymmetry.
    return 0.5 * std::log(a.partialPivLu().determinant());
}

CheckResult check_lemmas(const VerifyOptions& o) {
    std::ostringstream csv;
    CsvWriter w(csv, {"part", "arms", "value", "reference", "ok"});
    bool ok = true;
    std::string detail;

    // Variance-sum / information-gain chain and the log-det oracle on small (exact-mode) models.
    const std::size_t episodes = o.smoke ? 20 : 200;
    const std::size_t horizon = 50;
    std::size_t chain_fail = 0, oracle_fail = 0, total = 0;
    double worst_oracle = 0.0;
    for (const std::size_t arms : {2u, 3u, 4u}) {
        const GPBanditModel model = GPBanditModel::line_graph(arms, kReferenceLengthscale, kReferenceNoise, 0.25);
        const GammaReport gamma = max_info_gain(model, horizon);
        if (gamma.mode != GammaMode::exact) throw DegenerateDistribution("exact gamma expected for small models");
        const double gamma_t = gamma.exact[horizon];
        const double c_sigma = bound_ingredients(model).c_sigma;
        std::vector<std::array<double, 3>> per(episodes);
        parallel_for(episodes, o.threads, [&](std::size_t e) {
            Rng rng = stream_rng(o.seed, {8, arms, e});
            const RegretTrace tr = run_episode(model, horizon, rng);
            double pv = 0.0;
            for (double v : tr.predictive_variance) pv += v;
            per[e] = {pv / c_sigma, info_gain(model, tr.arms), log_det_oracle(model, tr.arms)};
        });
        double max_lhs = 0.0, max_ig = 0.0;
        for (const auto& [lhs, ig, oracle] : per) {
            ++total;
            if (!(lhs <= ig + 1e-9 && ig <= gamma_t + 1e-9)) ++chain_fail;
            const double diff = std::abs(ig - oracle);
            worst_oracle = std::max(worst_oracle, diff);
            if (diff > 1e-9) ++oracle_fail;
            max_lhs = std::max(max_lhs, lhs);
            max_ig = std::max(max_ig, ig);
        }
        w.row({"chain_max_lhs", std::to_string(arms), num(max_lhs), num(max_ig), "1"});
        w.row({"chain_max_info_gain", std::to_string(arms), num(max_ig), num(gamma_t), max_ig <= gamma_t + 1e-9 ? "1" : "0"});
    }
    ok = ok && chain_fail == 0 && oracle_fail == 0;
    detail += fmt("chain %zu/%zu episodes ok, oracle max diff %.2e; ", total - chain_fail, total, worst_oracle);

    // Uniform deviation bounds at three arm counts.
    const std::size_t draws = o.smoke ? 20'000 : 100'000;
    for (const std::size_t arms : {2u, 8u, 32u}) {
        const GPBanditModel model = GPBanditModel::line_graph(arms, kReferenceLengthscale, kReferenceNoise, 0.0);
        const DeviationReport r = deviation_check(model, draws, derive_seed(o.seed, {8, 1, arms}), o.threads);
        w.row({"deviation_center", std::to_string(arms), num(r.center.mean), num(r.center_bound), r.center_holds ? "1" : "0"});
        w.row({"deviation_pair", std::to_string(arms), num(r.pair.mean), num(r.pair_bound), r.pair_holds ? "1" : "0"});
        ok = ok && r.center_holds && r.pair_holds;
        detail += fmt("|X|=%zu deviation %s; ", arms, r.center_holds && r.pair_holds ? "ok" : "FAIL");
    }

    // Delta for two i.i.d. standard normal hidden rewards equals E[max] = 1/sqrt(pi).
    GPBanditModel two;
    two.mu = Eigen::VectorXd::Zero(2);
    two.sigma = Eigen::MatrixXd::Zero(2, 2);
    two.hid_mean = Eigen::VectorXd::Zero(2);
    two.hid_cov = Eigen::MatrixXd::Identity(2, 2);
    two.noise_sd = Eigen::VectorXd::Constant(2, kReferenceNoise);
    const MeanWithError d = delta_estimate(two, o.smoke ? 100'000 : 1'000'000, derive_seed(o.seed, {8, 2}), o.threads);
    const double target = 1.0 / std::sqrt(M_PI);
    const bool max_ok = std::abs(d.mean / target - 1.0) < 0.01;
    w.row({"max_of_two_normals", "2", num(d.mean), num(target), max_ok ? "1" : "0"});
    ok = ok && max_ok;
    detail += fmt("E[max of 2 normals] %.5f vs %.5f", d.mean, target);
    return {"lemmas", 8, ok, detail, csv.str()};
}

// ---------------------------------------------------------------------------
// 9. Refinement regimes

/// One-sided sign test: P[X >= positives] for X ~ Binomial(n, 1/2).
double sign_test_p(std::size_t positives, std::size_t negatives) {
    const std::size_t n = positives + negatives;
    if (n == 0) return 1.0;
    double p = 0.0;
    for (std::size_t k = positives; k <= n; ++k) {
        p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
    }
    return std::min(1.0, p);
}

CheckResult check_refinement(const VerifyOptions& o) {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::refinement;
    const std::size_t tasks = o.smoke ? 30 : 200;
    cfg.seeds.clear();
    for (std::size_t i = 0; i < tasks; ++i) cfg.seeds.push_back(derive_seed(o.seed, {9, i}));
    cfg.parallel = o.threads;
    cfg.refinement.conditions = {{FeedbackMode::oracle, false}, {FeedbackMode::self, true}, {FeedbackMode::self, false}};
    const std::string raw = refinement_csv(cfg);

    std::istringstream in(raw);
    const CsvTable t = read_csv(in);
    const std::size_t cs = t.column("seed"), cr = t.column("round"), cm = t.column("mode"), co = t.column("oracle_rate");
    const std::string last = std::to_string(cfg.refinement.rounds - 1);
    std::map<std::string, std::map<std::string, double>> final_rate;  // seed -> mode -> rate
    for (const auto& r : t.rows) {
        if (r[cr] == last) final_rate[r[cs]][r[cm]] = std::stod(r[co]);
    }

    std::ostringstream csv;
    CsvWriter w(csv, {"seed", "oracle", "self+examples", "self", "ordered"});
    std::size_t ordered = 0, up = 0, down = 0;
    double sum_uplift = 0.0;
    for (const auto seed : cfg.seeds) {
        auto& f = final_rate[std::to_string(seed)];
        const double a = f["oracle"], b = f["self+examples"], c = f["self"];
        const bool ord = a >= b && b >= c;
        ordered += ord ? 1 : 0;
        up += b > c ? 1 : 0;
        down += b < c ? 1 : 0;
        sum_uplift += b - c;
        w.row({std::to_string(seed), num(a), num(b), num(c), ord ? "1" : "0"});
    }
    const double frac = static_cast<double>(ordered) / static_cast<double>(tasks);
    const double p = sign_test_p(up, down);
    return {"refinement", 9, frac >= 0.9 && p < 0.05 && sum_uplift > 0.0,
            fmt("ordering on %.1f%% of %zu tasks; uplift +%zu/-%zu, mean %.4f, sign test p=%.3g", 100.0 * frac, tasks, up,
                down, sum_uplift / static_cast<double>(tasks), p),
            csv.str()};
}

// ---------------------------------------------------------------------------
// 10. Reproducibility

CheckResult run_named(std::string_view name, const VerifyOptions& o);

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

CheckResult check_reproducibility(const VerifyOptions& o) {
    std::ostringstream csv;
    CsvWriter w(csv, {"run", "bytes", "identical"});
    bool ok = true;
    std::size_t runs = 0;

    // Every other check at reduced scale, once serial and once threaded.
    VerifyOptions serial = o;
    serial.smoke = true;
    serial.threads = 1;
    VerifyOptions threaded = serial;
    threaded.threads = std::max<std::size_t>(2, o.threads);
    for (const auto& name : check_names()) {
        if (name == "reproducibility") continue;
        const std::string a = run_named(name, serial).csv;
        const std::string b = run_named(name, threaded).csv;
        const bool same = a == b && !a.empty();
        ok = ok && same;
        ++runs;
        w.row({name, std::to_string(a.size()), same ? "1" : "0"});
    }

    // The experiment runner end to end, twice into fresh directories.
    const auto base = std::filesystem::temp_directory_path() /
                      ("envagent_repro_" + std::to_string(derive_seed(o.seed, {10, static_cast<std::uint64_t>(
                                                                                       std::chrono::steady_clock::now()
                                                                                           .time_since_epoch()
                                                                                           .count())})));
    for (const auto kind : {ExperimentKind::selection, ExperimentKind::bandit, ExperimentKind::refinement}) {
        ExperimentConfig cfg;
        cfg.kind = kind;
        cfg.seeds = {1, 2};
        cfg.selection.tasks = 5;
        cfg.bandit.episodes = 100;
        cfg.bandit.horizon = 10;
        cfg.bandit.delta_draws = 5000;
        std::string first;
        for (int rep = 0; rep < 2; ++rep) {
            cfg.output_dir = base / (std::string(to_string(kind)) + std::to_string(rep));
            cfg.parallel = rep == 0 ? 1 : threaded.threads;
            const RunManifest m = run(cfg);
            const std::string bytes = read_file(m.outputs.front());
            if (rep == 0) {
                first = bytes;
            } else {
                const bool same = bytes == first && !bytes.empty();
                ok = ok && same;
                ++runs;
                w.row({"run:" + std::string(to_string(kind)), std::to_string(bytes.size()), same ? "1" : "0"});
            }
        }
    }
    std::error_code ec;
    std::filesystem::remove_all(base, ec);
    return {"reproducibility", 10, ok, fmt("%zu output pairs compared, %s", runs, ok ? "all identical" : "MISMATCH"),
            csv.str()};
}

struct Entry {
    const char* name;
    std::function<CheckResult(const VerifyOptions&)> fn;
};

const std::vector<Entry>& registry() {
    static const std::vector<Entry> r = {
        {"kernel", check_kernel},         {"smoothing", check_smoothing},   {"snr", check_snr},
        {"passk", check_passk},           {"calibration", check_calibration}, {"selection", check_selection},
        {"regret", check_regret},         {"lemmas", check_lemmas},         {"refinement", check_refinement},
        {"reproducibility", check_reproducibility},
    };
    return r;
}

CheckResult run_named(std::string_view name, const VerifyOptions& o) {
    for (const auto& e : registry()) {
        if (name == e.name) return e.fn(o);
    }
    throw InvalidConfig("unknown check '" + std::string(name) + "'");
}

}  // namespace

const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& e : registry()) n.emplace_back(e.name);
        return n;
    }();
    return names;
}

std::vector<std::string> parse_check_filter(std::string_view filter) {
    if (filter.empty()) return check_names();
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= filter.size()) {
        const std::size_t comma = std::min(filter.find(',', pos), filter.size());
        std::string item(filter.substr(pos, comma - pos));
        std::transform(item.begin(), item.end(), item.begin(), [](unsigned char c) { return std::tolower(c); });
        const auto& names = check_names();
        if (std::find(names.begin(), names.end(), item) == names.end()) {
            std::string valid;
            for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
            throw InvalidConfig("unknown check '" + item + "' (valid: " + valid + ")");
        }
        if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(item);
        pos = comma + 1;
    }
    // Keep criterion order regardless of how the filter was written.
    std::vector<std::string> ordered;
    for (const auto& n : check_names()) {
        if (std::find(out.begin(), out.end(), n) != out.end()) ordered.push_back(n);
    }
    return ordered;
}

CheckResult run_check(std::string_view name, const VerifyOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    CheckResult r = run_named(name, options);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::vector<CheckResult> run_checks(std::string_view filter, const VerifyOptions& options) {
    std::vector<CheckResult> out;
    for (const auto& name : parse_check_filter(filter)) out.push_back(run_check(name, options));
    return out;
}

}  // namespace envagent
