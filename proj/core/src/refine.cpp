#include "envagent/refine.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <string>

namespace envagent {

namespace {

constexpr double kFloor = 1e-12;

enum StreamTag : std::uint64_t { kCodeStream = 1, kSuiteStream = 2, kOracleStream = 3 };

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

template <class E, std::size_t N>
E parse_enum(std::string_view s, const std::array<E, N>& values, const char* what) {
    const std::string key = lower(s);
    std::string valid;
    for (E v : values) {
        if (key == to_string(v)) return v;
        if (!valid.empty()) valid += ", ";
        valid += to_string(v);
    }
    throw InvalidConfig("unknown " + std::string(what) + " '" + std::string(s) + "' (valid: " + valid + ")");
}

}  // namespace

std::string_view to_string(FeedbackMode m) { return m == FeedbackMode::oracle ? "oracle" : "self"; }

std::string_view to_string(Factorization f) {
    switch (f) {
        case Factorization::independent: return "independent";
        case Factorization::test_first: return "test_first";
        case Factorization::code_first: return "code_first";
    }
    return "independent";
}

std::string_view to_string(Compression c) {
    switch (c) {
        case Compression::full_history: return "full_history";
        case Compression::summary_concat: return "summary_concat";
        case Compression::insight_reformulate: return "insight_reformulate";
    }
    return "full_history";
}

FeedbackMode parse_feedback_mode(std::string_view s) {
    return parse_enum(s, std::array{FeedbackMode::oracle, FeedbackMode::self}, "feedback mode");
}

Factorization parse_factorization(std::string_view s) {
    return parse_enum(s, std::array{Factorization::independent, Factorization::test_first, Factorization::code_first},
                      "factorization");
}

Compression parse_compression(std::string_view s) {
    return parse_enum(
        s, std::array{Compression::full_history, Compression::summary_concat, Compression::insight_reformulate},
        "compression");
}

BeliefState BeliefState::from_description(const Description& desc, double fidelity) {
    desc.validate();
    if (!(fidelity >= 0.0 && fidelity <= 1.0)) throw InvalidConfig("fidelity must lie in [0, 1]");
    const std::size_t a = desc.alphabet_size;
    BeliefState b;
    b.desc_ = desc;
    b.factors_.assign(desc.domain_size, std::vector<double>(a, 1.0 / static_cast<double>(a)));
    for (const auto& [input, symbol] : desc.revealed) {
        auto& f = b.factors_[input];
        if (a == 1) {
            f[0] = 1.0;
            continue;
        }
        std::fill(f.begin(), f.end(), (1.0 - fidelity) / static_cast<double>(a - 1));
        f[symbol] = fidelity;
    }
    for (const auto& [input, symbol] : desc.example_pairs) b.collapse(input, symbol);
    return b;
}

double BeliefState::probability(std::size_t input, Symbol s) const { return factors_.at(input).at(s); }

Symbol BeliefState::quantile(std::size_t input, double u) const {
    const auto& f = factors_.at(input);
    double acc = 0.0;
    for (std::size_t s = 0; s < f.size(); ++s) {
        acc += f[s];
        if (u < acc) return static_cast<Symbol>(s);
    }
    // Rounding can leave the total just below 1; fall back to the last
    // symbol with positive mass.
    for (std::size_t s = f.size(); s-- > 0;) {
        if (f[s] > 0.0) return static_cast<Symbol>(s);
    }
    return 0;
}

void BeliefState::collapse(std::size_t input, Symbol s) {
    auto& f = factors_.at(input);
    if (s >= f.size()) throw InvalidInput("collapse: symbol outside alphabet");
    std::fill(f.begin(), f.end(), 0.0);
    f[s] = 1.0;
}

void BeliefState::reweight(std::size_t input, const std::vector<double>& likelihood) {
    auto& f = factors_.at(input);
    if (likelihood.size() != f.size()) throw ShapeError("reweight: likelihood length differs from alphabet");
    double total = 0.0;
    for (std::size_t s = 0; s < f.size(); ++s) {
        f[s] *= likelihood[s];
        total += f[s];
    }
    if (total <= 0.0) {
        ++floor_events_;
        for (auto& v : f) v = std::max(v, kFloor);
        total = std::accumulate(f.begin(), f.end(), 0.0);
    }
    for (auto& v : f) v /= total;
}

void LoopConfig::validate() const {
    if (rounds == 0) throw InvalidConfig("rounds must be at least 1");
    if (suite_size == 0) throw InvalidConfig("suite_size must be at least 1");
    if (!(fidelity >= 0.0 && fidelity <= 1.0)) throw InvalidConfig("fidelity must lie in [0, 1]");
    if (!(corruption >= 0.0 && corruption <= 1.0)) throw InvalidConfig("corruption must lie in [0, 1]");
}

void belief_update(BeliefState& belief, const FeedbackRecord& record, const LoopConfig& config) {
    if (record.oracle) {
        for (const auto& c : record.cases) belief.collapse(c.input, c.expected);
        return;
    }
    if (config.factorization == Factorization::code_first) return;
    const Description& desc = belief.description();
    const std::size_t a = desc.alphabet_size;
    if (a < 2) return;
    const double miss = config.corruption / static_cast<double>(a - 1);
    std::vector<double> lik(a);
    for (const auto& c : record.cases) {
        if (!desc.reveals(c.input)) continue;
        std::fill(lik.begin(), lik.end(), miss);
        lik[c.expected] = 1.0 - config.corruption;
        belief.reweight(c.input, lik);
    }
}

Proposal propose(const BeliefState& belief, const LoopConfig& config, std::uint64_t seed, std::size_t round) {
    const Description& desc = belief.description();
    Proposal p;
    p.code.id = derive_seed(seed, {kCodeStream, round});
    p.code.outputs.resize(belief.domain_size());
    for (std::size_t i = 0; i < belief.domain_size(); ++i) {
        Rng rng = stream_rng(seed, {kCodeStream, round, i});
        p.code.outputs[i] = belief.quantile(i, uniform01(rng));
    }

    Rng suite_rng = stream_rng(seed, {kSuiteStream, round});
    SuiteOptions opts;
    opts.id = derive_seed(seed, {kSuiteStream, round});
    p.suite = sample_test_suite(desc, config.suite_size, config.corruption, suite_rng, opts);

    switch (config.factorization) {
        case Factorization::independent:
            break;
        case Factorization::test_first:
            for (const auto& tc : p.suite.cases) p.code.outputs[tc.input] = *tc.expected;
            break;
        case Factorization::code_first:
            for (auto& tc : p.suite.cases) tc.expected = p.code.outputs[tc.input];
            break;
    }
    return p;
}

std::vector<FeedbackRecord> compress(const std::vector<FeedbackRecord>& history, Compression policy,
                                     std::size_t domain_size) {
    switch (policy) {
        case Compression::full_history:
            return history;
        case Compression::summary_concat: {
            // Failures are kept verbatim; passes keep only the input and the
            // symbol that passed.
            std::vector<FeedbackRecord> out;
            out.reserve(history.size());
            for (const auto& rec : history) {
                FeedbackRecord s{rec.round, rec.oracle, {}};
                std::vector<std::pair<std::size_t, Symbol>> passed;
                for (const auto& c : rec.cases) {
                    if (c.passed) {
                        passed.emplace_back(c.input, c.got);
                    } else {
                        s.cases.push_back(c);
                    }
                }
                for (const auto& [input, symbol] : passed) s.cases.push_back({input, symbol, symbol, true});
                out.push_back(std::move(s));
            }
            return out;
        }
        case Compression::insight_reformulate: {
            std::map<std::size_t, std::pair<bool, CaseRecord>> latest;
            for (const auto& rec : history) {
                for (const auto& c : rec.cases) {
                    if (c.input >= domain_size) throw InvalidInput("compress: input outside domain");
                    latest[c.input] = {rec.oracle, c};
                }
            }
            FeedbackRecord oracle{history.empty() ? 0 : history.back().round, true, {}};
            FeedbackRecord self{oracle.round, false, {}};
            for (const auto& [input, entry] : latest) (entry.first ? oracle : self).cases.push_back(entry.second);
            std::vector<FeedbackRecord> out;
            if (!oracle.cases.empty()) out.push_back(std::move(oracle));
            if (!self.cases.empty()) out.push_back(std::move(self));
            return out;
        }
    }
    return history;
}

Trajectory run_refinement(const AlgorithmSpec& alg, const Description& desc, const Environment& env,
                          const LoopConfig& config, std::uint64_t seed) {
    config.validate();
    alg.validate();
    if (env.mode != OutputMode::binary) throw UnsupportedMode("refinement loop requires a binary environment");
    if (desc.domain_size != alg.domain_size || desc.alphabet_size != alg.alphabet_size) {
        throw ShapeError("description and algorithm disagree on domain or alphabet");
    }
    const TestSuite oracle = oracle_suite(alg);
    const BeliefState prior = BeliefState::from_description(desc, config.fidelity);

    Trajectory traj;
    std::vector<FeedbackRecord> history;
    BeliefState belief = prior;
    for (std::size_t round = 0; round < config.rounds; ++round) {
        const Proposal p = propose(belief, config, seed, round);

        RoundMetrics m;
        m.round = round;
        m.oracle_rate = reward(p.code, oracle, env);
        m.self_rate = reward(p.code, p.suite, env);
        traj.rounds.push_back(m);

        FeedbackRecord rec;
        rec.round = round;
        if (config.feedback == FeedbackMode::oracle) {
            rec.oracle = true;
            Rng rng = stream_rng(seed, {kOracleStream, round});
            std::vector<std::size_t> inputs(alg.domain_size);
            std::iota(inputs.begin(), inputs.end(), std::size_t{0});
            const std::size_t k = std::min(config.suite_size, inputs.size());
            for (std::size_t i = 0; i < k; ++i) std::swap(inputs[i], inputs[i + uniform_index(rng, inputs.size() - i)]);
            TestSuite sub;
            for (std::size_t i = 0; i < k; ++i) sub.cases.push_back(oracle.cases[inputs[i]]);
            rec.cases = report(p.code, sub, env).per_case;
        } else {
            rec.cases = report(p.code, p.suite, env).per_case;
        }
        history.push_back(std::move(rec));

        belief = prior;
        for (const auto& r : compress(history, config.compression, alg.domain_size)) belief_update(belief, r, config);
        traj.floor_events = belief.floor_events();
    }
    return traj;
}

void write_trajectory_csv_header(std::ostream& out) {
    out << "seed,round,oracle_rate,self_rate,mode,factorization,compression\n";
}

void append_trajectory_csv(std::ostream& out, std::uint64_t seed, const LoopConfig& config, const Trajectory& t,
                           std::string_view mode) {
    if (mode.empty()) mode = to_string(config.feedback);
    char buf[96];
    for (const auto& r : t.rounds) {
        std::snprintf(buf, sizeof buf, "%llu,%zu,%.17g,%.17g,", static_cast<unsigned long long>(seed), r.round,
                      r.oracle_rate, r.self_rate);
        out << buf << mode << ',' << to_string(config.factorization) << ','
            << to_string(config.compression) << '\n';
    }
}

}  // namespace envagent
