#include "envagent/selector.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <set>

namespace envagent {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

/// sim_hat_m(c_i, c_k): mean over suites of the per-case agreement fraction.
double mc_similarity(const ExecutionMatrix& x, std::size_t i, std::size_t k) {
    double sum = 0.0;
    for (std::size_t j = 0; j < x.m; ++j) {
        sum += static_cast<double>(agreement_count(x.outputs[i][j], x.outputs[k][j])) /
               static_cast<double>(x.suite_sizes[j]);
    }
    return sum / static_cast<double>(x.m);
}

bool identical_rows(const ExecutionMatrix& x, std::size_t i, std::size_t k) { return x.outputs[i] == x.outputs[k]; }

/// p_hat_{n,m}(N^1) when `hard` is false, p_hat_{n,m}(N^inf) otherwise.
std::vector<double> neighborhood_scores(const ExecutionMatrix& x, bool hard) {
    std::vector<double> out(x.n);
    for (std::size_t i = 0; i < x.n; ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < x.n; ++k) {
            sum += hard ? (identical_rows(x, i, k) ? 1.0 : 0.0) : mc_similarity(x, i, k);
        }
        out[i] = sum / static_cast<double>(x.n);
    }
    return out;
}

/// E_hat[R] (soft) or E_hat[R^inf] (hard) per program.
std::vector<double> pass_scores(const ExecutionMatrix& x, bool hard) {
    std::vector<double> out(x.n);
    for (std::size_t i = 0; i < x.n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < x.m; ++j) {
            const PassCount pc = x.pass_count(i, j);
            sum += hard ? (pc.all_passed() ? 1.0 : 0.0) : pc.value();
        }
        out[i] = sum / static_cast<double>(x.m);
    }
    return out;
}

void require_mode(const ExecutionMatrix& x, Heuristic h) {
    if (h == Heuristic::Random) return;
    const OutputMode wanted = needs_raw_outputs(h) ? OutputMode::generalized : OutputMode::binary;
    if (x.mode != wanted) {
        throw UnsupportedMode(std::string(to_string(h)) + " requires a " +
                              (wanted == OutputMode::binary ? "binary" : "generalized") + " execution matrix");
    }
}

ExecutionMatrix representatives(const ExecutionMatrix& x, const std::vector<std::size_t>& classes) {
    ExecutionMatrix r;
    r.mode = x.mode;
    r.m = x.m;
    r.suite_ids = x.suite_ids;
    r.suite_sizes = x.suite_sizes;
    std::size_t next = 0;
    for (std::size_t i = 0; i < x.n; ++i) {
        if (classes[i] != next) continue;
        r.code_ids.push_back(x.code_ids[i]);
        r.outputs.push_back(x.outputs[i]);
        ++next;
    }
    r.n = r.outputs.size();
    return r;
}

}  // namespace

std::string_view to_string(Heuristic h) {
    switch (h) {
        case Heuristic::Random: return "Random";
        case Heuristic::MBRExecHard: return "MBRExecHard";
        case Heuristic::MBRExecSoft: return "MBRExecSoft";
        case Heuristic::AlphaCode: return "AlphaCode";
        case Heuristic::FunCoder: return "FunCoder";
        case Heuristic::MaxPassHard: return "MaxPassHard";
        case Heuristic::MaxPassSoft: return "MaxPassSoft";
        case Heuristic::CodeTHard: return "CodeTHard";
        case Heuristic::CodeTSoft: return "CodeTSoft";
    }
    return "?";
}

Heuristic parse_heuristic(std::string_view name) {
    const std::string key = lower(trim(name));
    for (Heuristic h : kAllHeuristics) {
        if (lower(to_string(h)) == key) return h;
    }
    std::string valid;
    for (Heuristic h : kAllHeuristics) valid += (valid.empty() ? "" : ", ") + std::string(to_string(h));
    throw InvalidConfig("unknown heuristic '" + std::string(name) + "'; valid names: " + valid);
}

std::vector<Heuristic> parse_heuristic_list(std::string_view list) {
    std::vector<Heuristic> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto end = std::min(list.find(',', start), list.size());
        const auto item = trim(list.substr(start, end - start));
        if (!item.empty()) out.push_back(parse_heuristic(item));
        start = end + 1;
    }
    if (out.empty()) throw InvalidConfig("heuristic list is empty");
    return out;
}

bool needs_raw_outputs(Heuristic h) { return h == Heuristic::AlphaCode || h == Heuristic::FunCoder; }

PassCount ExecutionMatrix::pass_count(std::size_t i, std::size_t j) const {
    if (mode != OutputMode::binary) throw UnsupportedMode("pass fractions exist only for binary matrices");
    PassCount pc{0, suite_sizes[j]};
    for (Symbol o : outputs[i][j]) pc.passed += o;
    return pc;
}

void ExecutionMatrix::validate() const {
    if (n == 0 || m == 0) throw InvalidInput("execution matrix needs n >= 1 and m >= 1");
    if (code_ids.size() != n || suite_ids.size() != m || suite_sizes.size() != m || outputs.size() != n) {
        throw ShapeError("execution matrix dimensions are inconsistent");
    }
    for (const auto& row : outputs) {
        if (row.size() != m) throw ShapeError("execution matrix has a hole");
        for (std::size_t j = 0; j < m; ++j) {
            if (row[j].size() != suite_sizes[j] || suite_sizes[j] == 0) {
                throw ShapeError("output vector length differs from suite size");
            }
            if (mode == OutputMode::binary) {
                for (Symbol o : row[j]) {
                    if (o > 1) throw ShapeError("binary matrix holds a non-binary output");
                }
            }
        }
    }
}

ExecutionMatrix build_execution_matrix(std::span<const BehaviorTable> codes, std::span<const TestSuite> suites,
                                       const Environment& e) {
    ExecutionMatrix x;
    x.mode = e.mode;
    x.n = codes.size();
    x.m = suites.size();
    for (const auto& c : codes) x.code_ids.push_back(c.id);
    for (const auto& t : suites) {
        x.suite_ids.push_back(t.id);
        x.suite_sizes.push_back(t.size());
    }
    x.outputs.resize(x.n);
    for (std::size_t i = 0; i < x.n; ++i) {
        x.outputs[i].reserve(x.m);
        for (const auto& t : suites) x.outputs[i].push_back(execute(codes[i], t, e));
    }
    x.validate();
    return x;
}

std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k,
                                      std::span<const std::uint64_t> code_ids) {
    if (k == 0 || k > scores.size()) throw InvalidInput("select_top_k: k must lie in [1, n]");
    if (!code_ids.empty() && code_ids.size() != scores.size()) throw ShapeError("select_top_k: id list length");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto id_of = [&](std::size_t i) { return code_ids.empty() ? static_cast<std::uint64_t>(i) : code_ids[i]; };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return id_of(a) < id_of(b);
    });
    idx.resize(k);
    return idx;
}

SelectionScore score(const ExecutionMatrix& matrix, Heuristic heuristic, const ScoreConfig& config) {
    matrix.validate();
    require_mode(matrix, heuristic);
    SelectionScore out;
    out.heuristic = heuristic;
    switch (heuristic) {
        case Heuristic::Random: {
            Rng rng = stream_rng(config.seed, {0x52616e646f6dULL});
            out.scores.resize(matrix.n);
            for (auto& s : out.scores) s = uniform01(rng);
            break;
        }
        case Heuristic::MBRExecHard:
        case Heuristic::AlphaCode: out.scores = neighborhood_scores(matrix, true); break;
        case Heuristic::MBRExecSoft:
        case Heuristic::FunCoder: out.scores = neighborhood_scores(matrix, false); break;
        case Heuristic::MaxPassHard: out.scores = pass_scores(matrix, true); break;
        case Heuristic::MaxPassSoft: out.scores = pass_scores(matrix, false); break;
        case Heuristic::CodeTHard:
        case Heuristic::CodeTSoft: {
            out.scores = neighborhood_scores(matrix, heuristic == Heuristic::CodeTHard);
            const auto pass = pass_scores(matrix, false);
            for (std::size_t i = 0; i < matrix.n; ++i) out.scores[i] *= pass[i];
            break;
        }
    }
    out.chosen = select_top_k(out.scores, config.k, matrix.code_ids);
    return out;
}

std::vector<std::size_t> empirical_classes(const ExecutionMatrix& matrix) {
    std::map<std::vector<OutputVector>, std::size_t> seen;
    std::vector<std::size_t> out(matrix.n);
    for (std::size_t i = 0; i < matrix.n; ++i) {
        auto [it, inserted] = seen.emplace(matrix.outputs[i], seen.size());
        out[i] = it->second;
    }
    return out;
}

std::size_t class_level_top1(const ExecutionMatrix& matrix, Heuristic heuristic, const ScoreConfig& config) {
    const auto classes = empirical_classes(matrix);
    const ExecutionMatrix reps = representatives(matrix, classes);
    ScoreConfig one = config;
    one.k = 1;
    return score(reps, heuristic, one).chosen.front();
}

int pass_at_k_eval(std::span<const BehaviorTable> chosen, const AlgorithmSpec& alg, const Environment& e) {
    const TestSuite oracle = oracle_suite(alg);
    for (const auto& c : chosen) {
        if (reward_exact(c, oracle, e).all_passed()) return 1;
    }
    return 0;
}

GreedyOptimality greedy_optimality_check(std::span<const double> class_probs, std::size_t k) {
    const std::size_t n = class_probs.size();
    if (n == 0 || n > 20) throw InvalidInput("greedy_optimality_check supports 1..20 classes");
    if (k == 0 || k > n) throw InvalidInput("greedy_optimality_check: k must lie in [1, n]");
    CompensatedSum total;
    for (double p : class_probs) {
        if (!(p >= 0.0)) throw InvalidInput("class probabilities must be nonnegative");
        total.add(p);
    }
    if (std::abs(total.value() - 1.0) > 1e-12) throw InvalidInput("class probabilities must sum to 1");

    std::vector<Rational> exact;
    exact.reserve(n);
    for (double p : class_probs) exact.push_back(to_rational(p));

    GreedyOptimality out;
    out.greedy_set = select_top_k(class_probs, k);
    std::sort(out.greedy_set.begin(), out.greedy_set.end());
    out.greedy_value = 0;
    for (std::size_t i : out.greedy_set) out.greedy_value += exact[i];

    out.best_value = -1;
    for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
        Rational v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1U << i)) v += exact[i];
        }
        if (v > out.best_value) {
            out.best_value = v;
            out.best_set.clear();
            for (std::size_t i = 0; i < n; ++i) {
                if (mask & (1U << i)) out.best_set.push_back(i);
            }
        }
    }
    out.optimal = out.greedy_value == out.best_value;
    return out;
}

Rational calibration_check(const CodeDistribution& codes, const SuiteDistribution& dist, const Environment& e) {
    codes.validate();
    dist.validate();
    if (e.mode != OutputMode::binary) throw UnsupportedMode("calibration is defined through binary rewards");
    Rational code_total = 0;
    for (double w : codes.weights) code_total += to_rational(w);
    Rational suite_total = 0;
    for (double w : dist.weights) suite_total += to_rational(w);

    Rational worst = 0;
    for (std::size_t i = 0; i < codes.codes.size(); ++i) {
        if (codes.weights[i] == 0.0) continue;
        const auto& c = codes.codes[i];
        Rational class_mass = 0;
        for (std::size_t k = 0; k < codes.codes.size(); ++k) {
            if (codes.weights[k] != 0.0 && equivalence(c, codes.codes[k], dist, e) == 1) {
                class_mass += to_rational(codes.weights[k]);
            }
        }
        Rational pass_mass = 0;
        for (std::size_t j = 0; j < dist.suites.size(); ++j) {
            if (dist.weights[j] != 0.0 && reward_exact(c, dist.suites[j], e).all_passed()) {
                pass_mass += to_rational(dist.weights[j]);
            }
        }
        worst = std::max(worst, Rational(abs(class_mass / code_total - pass_mass / suite_total)));
    }
    return worst;
}

CalibratedFamily make_calibrated_family(const AlgorithmSpec& alg, std::size_t classes, std::size_t aliases_per_class,
                                        Rng& rng) {
    alg.validate();
    if (classes == 0 || aliases_per_class == 0) throw InvalidInput("calibrated family needs classes and aliases");
    // Only full-domain behaviors are distinguishable, so the domain must admit
    // enough distinct tables.
    double capacity = 1.0;
    for (std::size_t i = 0; i < alg.domain_size && capacity < 1e9; ++i) capacity *= static_cast<double>(alg.alphabet_size);
    if (capacity < static_cast<double>(classes)) throw InvalidInput("domain too small for the requested class count");

    std::vector<std::vector<Symbol>> behaviors{alg.truth};
    std::set<std::vector<Symbol>> seen{alg.truth};
    while (behaviors.size() < classes) {
        auto b = alg.truth;
        const std::size_t flips = 1 + uniform_index(rng, alg.domain_size);
        for (std::size_t f = 0; f < flips; ++f) {
            const std::size_t i = uniform_index(rng, alg.domain_size);
            b[i] = static_cast<Symbol>(uniform_index(rng, alg.alphabet_size));
        }
        if (seen.insert(b).second) behaviors.push_back(std::move(b));
    }

    // Dyadic masses: split 2^20 units into classes * aliases positive parts.
    constexpr std::uint64_t kUnits = 1ULL << 20;
    const std::size_t parts = classes * aliases_per_class;
    std::set<std::uint64_t> cuts;
    while (cuts.size() < parts - 1) cuts.insert(1 + rng() % (kUnits - 1));
    std::vector<std::uint64_t> bounds{0};
    bounds.insert(bounds.end(), cuts.begin(), cuts.end());
    bounds.push_back(kUnits);

    CalibratedFamily fam;
    std::uint64_t next_id = 0;
    for (std::size_t k = 0; k < classes; ++k) {
        std::uint64_t class_units = 0;
        for (std::size_t a = 0; a < aliases_per_class; ++a) {
            const std::size_t p = k * aliases_per_class + a;
            const std::uint64_t units = bounds[p + 1] - bounds[p];
            class_units += units;
            fam.codes.codes.push_back(BehaviorTable{behaviors[k], next_id++});
            fam.codes.weights.push_back(static_cast<double>(units) / static_cast<double>(kUnits));
        }
        TestSuite t;
        t.id = k;
        for (std::size_t i = 0; i < alg.domain_size; ++i) t.cases.push_back({i, behaviors[k][i]});
        fam.suites.suites.push_back(std::move(t));
        fam.suites.weights.push_back(static_cast<double>(class_units) / static_cast<double>(kUnits));
    }
    return fam;
}

}  // namespace envagent
