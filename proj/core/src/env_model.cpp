#include "envagent/env_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace envagent {

namespace {

Symbol wrong_symbol(Symbol right, std::size_t alphabet_size, Rng& rng) {
    if (alphabet_size < 2) return right;
    auto s = static_cast<Symbol>(uniform_index(rng, alphabet_size - 1));
    return s >= right ? s + 1 : s;
}

Symbol uniform_symbol(std::size_t alphabet_size, Rng& rng) {
    return static_cast<Symbol>(uniform_index(rng, alphabet_size));
}

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidConfig(std::string(what) + " must lie in [0, 1]");
}

void check_shapes(const BehaviorTable& c, const TestSuite& t, const Environment& e) {
    e.validate();
    for (const auto& tc : t.cases) {
        if (tc.input >= c.outputs.size()) {
            throw ShapeError("test input " + std::to_string(tc.input) + " outside program domain of size " +
                             std::to_string(c.outputs.size()));
        }
        if (e.mode == OutputMode::binary && !tc.expected) {
            throw ShapeError("binary environment requires an expected output on every case");
        }
    }
}

Symbol raw_output(const BehaviorTable& c, const TestCase& tc) { return c.outputs[tc.input]; }

}  // namespace

Environment Environment::binary(double eval_noise) { return Environment{2, OutputMode::binary, eval_noise}; }

Environment Environment::generalized(std::size_t alphabet_size, double eval_noise) {
    return Environment{alphabet_size, OutputMode::generalized, eval_noise};
}

void Environment::validate() const {
    if (alphabet_size == 0) throw InvalidConfig("environment alphabet_size must be positive");
    if (mode == OutputMode::binary && alphabet_size != 2) {
        throw InvalidConfig("binary environments have alphabet_size 2");
    }
    if (!(eval_noise >= 0.0 && eval_noise < 1.0)) throw InvalidConfig("eval_noise must lie in [0, 1)");
}

bool AlgorithmSpec::is_ambiguous(std::size_t input) const {
    return std::binary_search(ambiguous_inputs.begin(), ambiguous_inputs.end(), input);
}

void AlgorithmSpec::validate() const {
    if (domain_size == 0 || alphabet_size == 0) throw InvalidConfig("algorithm needs positive domain and alphabet");
    if (truth.size() != domain_size) throw InvalidConfig("truth table length differs from domain_size");
    for (Symbol s : truth) {
        if (s >= alphabet_size) throw InvalidConfig("truth symbol outside alphabet");
    }
    if (!std::is_sorted(ambiguous_inputs.begin(), ambiguous_inputs.end()) ||
        std::adjacent_find(ambiguous_inputs.begin(), ambiguous_inputs.end()) != ambiguous_inputs.end()) {
        throw InvalidConfig("ambiguous_inputs must be sorted and unique");
    }
    if (!ambiguous_inputs.empty() && ambiguous_inputs.back() >= domain_size) {
        throw InvalidConfig("ambiguous input outside domain");
    }
}

void Description::validate() const {
    if (domain_size == 0 || alphabet_size == 0) throw InvalidConfig("description needs positive domain and alphabet");
    for (const auto& [input, symbol] : revealed) {
        if (input >= domain_size || symbol >= alphabet_size) throw InvalidConfig("revealed entry out of range");
    }
    for (const auto& [input, symbol] : example_pairs) {
        auto it = revealed.find(input);
        if (it == revealed.end() || it->second != symbol) {
            throw InvalidConfig("example pair not contained in revealed map");
        }
    }
}

AlgorithmSpec sample_algorithm(std::size_t domain_size, std::size_t alphabet_size, double ambiguity_level,
                               Rng& rng) {
    if (domain_size == 0) throw InvalidConfig("domain_size must be positive");
    if (alphabet_size == 0) throw InvalidConfig("alphabet_size must be positive");
    if (!(ambiguity_level >= 0.0 && ambiguity_level < 1.0)) throw InvalidConfig("ambiguity_level must lie in [0, 1)");

    AlgorithmSpec alg;
    alg.domain_size = domain_size;
    alg.alphabet_size = alphabet_size;
    alg.truth.resize(domain_size);
    for (auto& s : alg.truth) s = uniform_symbol(alphabet_size, rng);

    const auto n_ambiguous =
        static_cast<std::size_t>(std::floor(ambiguity_level * static_cast<double>(domain_size)));
    std::vector<std::size_t> order(domain_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < n_ambiguous; ++i) {
        std::swap(order[i], order[i + uniform_index(rng, domain_size - i)]);
    }
    alg.ambiguous_inputs.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_ambiguous));
    std::sort(alg.ambiguous_inputs.begin(), alg.ambiguous_inputs.end());
    return alg;
}

Description sample_description(const AlgorithmSpec& alg, bool reveal_examples, Rng& rng,
                               const DescriptionOptions& options) {
    alg.validate();
    Description d;
    d.domain_size = alg.domain_size;
    d.alphabet_size = alg.alphabet_size;
    for (std::size_t i = 0; i < alg.domain_size; ++i) {
        if (!alg.is_ambiguous(i)) d.revealed.emplace(i, alg.truth[i]);
    }
    d.ambiguity_level =
        static_cast<double>(alg.ambiguous_inputs.size()) / static_cast<double>(alg.domain_size);

    if (reveal_examples && !d.revealed.empty()) {
        std::vector<std::size_t> pool;
        pool.reserve(d.revealed.size());
        for (const auto& entry : d.revealed) pool.push_back(entry.first);
        const std::size_t count = std::clamp<std::size_t>(options.example_count, 1, pool.size());
        for (std::size_t i = 0; i < count; ++i) {
            std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
        }
        pool.resize(count);
        std::sort(pool.begin(), pool.end());
        for (std::size_t input : pool) d.example_pairs.emplace_back(input, d.revealed.at(input));
    }
    return d;
}

BehaviorTable sample_program(const Description& desc, double fidelity, Rng& rng, std::uint64_t id) {
    check_probability(fidelity, "fidelity");
    BehaviorTable c;
    c.id = id;
    c.outputs.resize(desc.domain_size);
    for (std::size_t i = 0; i < desc.domain_size; ++i) {
        auto it = desc.revealed.find(i);
        if (it == desc.revealed.end()) {
            c.outputs[i] = uniform_symbol(desc.alphabet_size, rng);
        } else if (uniform01(rng) < fidelity) {
            c.outputs[i] = it->second;
        } else {
            c.outputs[i] = wrong_symbol(it->second, desc.alphabet_size, rng);
        }
    }
    return c;
}

TestSuite sample_test_suite(const Description& desc, std::size_t size, double corruption, Rng& rng,
                            const SuiteOptions& options) {
    if (size == 0) throw InvalidConfig("test suite size must be at least 1");
    check_probability(corruption, "corruption");
    check_probability(options.ambient_fraction, "ambient_fraction");

    std::vector<std::size_t> revealed_pool;
    std::vector<std::size_t> ambiguous_pool;
    for (std::size_t i = 0; i < desc.domain_size; ++i) {
        (desc.reveals(i) ? revealed_pool : ambiguous_pool).push_back(i);
    }
    // Inputs are drawn without replacement while possible so a suite never
    // carries two conflicting expectations for one input.
    auto remaining_revealed = revealed_pool;
    auto remaining_ambiguous = ambiguous_pool;
    auto draw_from = [&rng](std::vector<std::size_t>& pool) {
        const std::size_t k = uniform_index(rng, pool.size());
        const std::size_t input = pool[k];
        pool[k] = pool.back();
        pool.pop_back();
        return input;
    };

    TestSuite t;
    t.id = options.id;
    t.cases.reserve(size);
    for (std::size_t k = 0; k < size; ++k) {
        if (remaining_revealed.empty() && remaining_ambiguous.empty()) {
            remaining_revealed = revealed_pool;
            remaining_ambiguous = ambiguous_pool;
        }
        bool ambient = remaining_revealed.empty();
        if (!ambient && !remaining_ambiguous.empty()) ambient = uniform01(rng) < options.ambient_fraction;
        const std::size_t input = draw_from(ambient ? remaining_ambiguous : remaining_revealed);

        TestCase tc{input, std::nullopt};
        if (!options.input_only) {
            auto it = desc.revealed.find(input);
            if (it == desc.revealed.end()) {
                tc.expected = uniform_symbol(desc.alphabet_size, rng);
            } else if (uniform01(rng) < corruption) {
                tc.expected = wrong_symbol(it->second, desc.alphabet_size, rng);
            } else {
                tc.expected = it->second;
            }
        }
        t.cases.push_back(tc);
    }
    return t;
}

TestSuite oracle_suite(const AlgorithmSpec& alg, std::uint64_t id) {
    alg.validate();
    TestSuite t;
    t.id = id;
    t.cases.reserve(alg.domain_size);
    for (std::size_t i = 0; i < alg.domain_size; ++i) t.cases.push_back({i, alg.truth[i]});
    return t;
}

OutputVector execute(const BehaviorTable& c, const TestSuite& t, const Environment& e) {
    if (!e.deterministic()) throw InvalidInput("noisy environment requires an rng");
    check_shapes(c, t, e);
    OutputVector out;
    out.reserve(t.size());
    for (const auto& tc : t.cases) {
        const Symbol got = raw_output(c, tc);
        out.push_back(e.mode == OutputMode::binary ? static_cast<Symbol>(got == *tc.expected) : got);
    }
    return out;
}

OutputVector execute(const BehaviorTable& c, const TestSuite& t, const Environment& e, Rng& rng) {
    check_shapes(c, t, e);
    OutputVector out;
    out.reserve(t.size());
    for (const auto& tc : t.cases) {
        const Symbol got = raw_output(c, tc);
        Symbol o = e.mode == OutputMode::binary ? static_cast<Symbol>(got == *tc.expected) : got;
        if (e.eval_noise > 0.0 && uniform01(rng) < e.eval_noise) {
            o = e.mode == OutputMode::binary ? 1 - o : wrong_symbol(o, e.alphabet_size, rng);
        }
        out.push_back(o);
    }
    return out;
}

PassCount reward_exact(const BehaviorTable& c, const TestSuite& t, const Environment& e) {
    if (e.mode != OutputMode::binary) throw UnsupportedMode("reward is defined for binary environments only");
    const OutputVector o = execute(c, t, e);
    PassCount pc{0, o.size()};
    for (Symbol s : o) pc.passed += s;
    return pc;
}

double reward(const BehaviorTable& c, const TestSuite& t, const Environment& e) {
    return reward_exact(c, t, e).value();
}

Report report(const BehaviorTable& c, const TestSuite& t, const Environment& e) {
    if (e.mode != OutputMode::binary) throw UnsupportedMode("reports are defined for binary environments only");
    const OutputVector o = execute(c, t, e);
    Report r;
    r.per_case.reserve(t.size());
    r.count.total = t.size();
    for (std::size_t k = 0; k < t.size(); ++k) {
        const auto& tc = t.cases[k];
        const bool passed = o[k] == 1;
        r.per_case.push_back({tc.input, *tc.expected, c.outputs[tc.input], passed});
        r.count.passed += passed ? 1 : 0;
    }
    return r;
}

bool passes_oracle(const BehaviorTable& c, const AlgorithmSpec& alg) { return c.outputs == alg.truth; }

}  // namespace envagent
