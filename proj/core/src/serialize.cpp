#include "envagent/serialize.hpp"

#include <fstream>

namespace envagent {

using nlohmann::json;

namespace {

std::string_view mode_name(OutputMode m) { return m == OutputMode::binary ? "binary" : "generalized"; }

OutputMode parse_mode(const std::string& s) {
    if (s == "binary") return OutputMode::binary;
    if (s == "generalized") return OutputMode::generalized;
    throw InvalidInput("unknown output mode '" + s + "' (valid: binary, generalized)");
}

json summary(const MeanWithError& m) { return {{"mean", m.mean}, {"standard_error", m.standard_error}}; }

}  // namespace

void to_json(json& j, const Environment& e) {
    j = {{"alphabet_size", e.alphabet_size}, {"mode", mode_name(e.mode)}, {"eval_noise", e.eval_noise}};
}

void from_json(const json& j, Environment& e) {
    e.alphabet_size = j.at("alphabet_size").get<std::size_t>();
    e.mode = parse_mode(j.at("mode").get<std::string>());
    e.eval_noise = j.at("eval_noise").get<double>();
    e.validate();
}

void to_json(json& j, const AlgorithmSpec& a) {
    j = {{"domain_size", a.domain_size},
         {"alphabet_size", a.alphabet_size},
         {"truth", a.truth},
         {"ambiguous_inputs", a.ambiguous_inputs}};
}

void from_json(const json& j, AlgorithmSpec& a) {
    a.domain_size = j.at("domain_size").get<std::size_t>();
    a.alphabet_size = j.at("alphabet_size").get<std::size_t>();
    a.truth = j.at("truth").get<std::vector<Symbol>>();
    a.ambiguous_inputs = j.at("ambiguous_inputs").get<std::vector<std::size_t>>();
    a.validate();
}

void to_json(json& j, const Description& d) {
    json revealed = json::array();
    for (const auto& [input, symbol] : d.revealed) revealed.push_back({input, symbol});
    json examples = json::array();
    for (const auto& [input, symbol] : d.example_pairs) examples.push_back({input, symbol});
    j = {{"domain_size", d.domain_size},
         {"alphabet_size", d.alphabet_size},
         {"revealed", revealed},
         {"example_pairs", examples},
         {"ambiguity_level", d.ambiguity_level}};
}

void from_json(const json& j, Description& d) {
    d.domain_size = j.at("domain_size").get<std::size_t>();
    d.alphabet_size = j.at("alphabet_size").get<std::size_t>();
    d.revealed.clear();
    for (const auto& p : j.at("revealed")) d.revealed.emplace(p.at(0).get<std::size_t>(), p.at(1).get<Symbol>());
    d.example_pairs.clear();
    for (const auto& p : j.at("example_pairs")) d.example_pairs.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<Symbol>());
    d.ambiguity_level = j.at("ambiguity_level").get<double>();
    d.validate();
}

void to_json(json& j, const BehaviorTable& c) { j = {{"id", c.id}, {"outputs", c.outputs}}; }

void from_json(const json& j, BehaviorTable& c) {
    c.id = j.at("id").get<std::uint64_t>();
    c.outputs = j.at("outputs").get<std::vector<Symbol>>();
}

void to_json(json& j, const TestSuite& t) {
    json cases = json::array();
    for (const auto& tc : t.cases) {
        cases.push_back({{"input", tc.input}, {"expected", tc.expected ? json(*tc.expected) : json(nullptr)}});
    }
    j = {{"id", t.id}, {"cases", cases}};
}

void from_json(const json& j, TestSuite& t) {
    t.id = j.at("id").get<std::uint64_t>();
    t.cases.clear();
    for (const auto& c : j.at("cases")) {
        TestCase tc{c.at("input").get<std::size_t>(), std::nullopt};
        if (!c.at("expected").is_null()) tc.expected = c.at("expected").get<Symbol>();
        t.cases.push_back(tc);
    }
}

void to_json(json& j, const ExecutionMatrix& m) {
    j = {{"mode", mode_name(m.mode)},
         {"n", m.n},
         {"m", m.m},
         {"code_ids", m.code_ids},
         {"suite_ids", m.suite_ids},
         {"suite_sizes", m.suite_sizes},
         {"outputs", m.outputs}};
}

void from_json(const json& j, ExecutionMatrix& m) {
    m.mode = parse_mode(j.at("mode").get<std::string>());
    m.n = j.at("n").get<std::size_t>();
    m.m = j.at("m").get<std::size_t>();
    m.code_ids = j.at("code_ids").get<std::vector<std::uint64_t>>();
    m.suite_ids = j.at("suite_ids").get<std::vector<std::uint64_t>>();
    m.suite_sizes = j.at("suite_sizes").get<std::vector<std::size_t>>();
    m.outputs = j.at("outputs").get<std::vector<std::vector<OutputVector>>>();
    m.validate();
}

void to_json(json& j, const BoundReport& r) {
    json rounds = json::array();
    for (std::size_t t = 0; t < r.horizon; ++t) {
        rounds.push_back({{"round", t + 1},
                          {"gamma", r.gamma[t]},
                          {"bound_obs", r.bound_obs[t]},
                          {"bound_true", r.bound_true[t]},
                          {"cum_regret_obs", summary(r.cum_regret_obs[t])},
                          {"cum_regret_true", summary(r.cum_regret_true[t])}});
    }
    j = {{"horizon", r.horizon},
         {"episodes", r.episodes},
         {"beta", r.beta},
         {"c_sigma", r.c_sigma},
         {"delta", summary(r.delta)},
         {"last_quartile_regret_true", summary(r.last_quartile_regret_true)},
         {"satisfied_obs", r.satisfied_obs},
         {"satisfied_true", r.satisfied_true},
         {"rounds", rounds}};
}

void to_json(json& j, const Trajectory& t) {
    json rounds = json::array();
    for (const auto& r : t.rounds) {
        rounds.push_back({{"round", r.round}, {"oracle_rate", r.oracle_rate}, {"self_rate", r.self_rate}});
    }
    j = {{"floor_events", t.floor_events}, {"rounds", rounds}};
}

json snapshot(std::string_view kind, json payload) {
    return {{"schema_version", kSchemaVersion}, {"kind", kind}, {"data", std::move(payload)}};
}

json unwrap_snapshot(const json& doc, std::string_view kind) {
    if (!doc.is_object() || !doc.contains("schema_version")) throw InvalidInput("snapshot: missing schema_version");
    const int v = doc.at("schema_version").get<int>();
    if (v != kSchemaVersion) {
        throw InvalidInput("snapshot: schema_version " + std::to_string(v) + " is not supported (expected " +
                           std::to_string(kSchemaVersion) + ")");
    }
    const auto k = doc.at("kind").get<std::string>();
    if (k != kind) throw InvalidInput("snapshot: expected kind '" + std::string(kind) + "', found '" + k + "'");
    return doc.at("data");
}

void save_execution_matrix(const std::filesystem::path& path, const ExecutionMatrix& m) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << canonical_dump(snapshot("execution_matrix", m)) << '\n';
}

ExecutionMatrix load_execution_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
    return unwrap_snapshot(doc, "execution_matrix").get<ExecutionMatrix>();
}

std::string canonical_dump(const json& j) {
    // nlohmann::json objects are std::map-backed, so keys are already sorted.
    return j.dump(2);
}

}  // namespace envagent
