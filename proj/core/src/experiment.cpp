#include "envagent/experiment.hpp"

#include "envagent/csv.hpp"
#include "envagent/serialize.hpp"
#include "envagent/verify.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace envagent {

using nlohmann::json;

namespace {

enum StreamTag : std::uint64_t { kSelectionTask = 11, kRandomHeuristic = 12, kRefineTask = 13 };

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += sep;
        out += p;
    }
    return out;
}

/// Collects every problem in a document before failing.
class Reader {
public:
    void keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
        if (!obj.is_object()) {
            bad_.push_back(path.empty() ? "<root>" : path);
            return;
        }
        for (const auto& [key, value] : obj.items()) {
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) bad_.push_back(qualify(path, key));
        }
    }

    template <class T>
    void get(const json& obj, const std::string& path, const char* key, T& out) {
        if (!obj.is_object() || !obj.contains(key)) return;
        try {
            out = obj.at(key).get<T>();
        } catch (const json::exception&) {
            bad_.push_back(qualify(path, key));
        }
    }

    template <class F>
    void parse(const json& obj, const std::string& path, const char* key, F&& fn) {
        if (!obj.is_object() || !obj.contains(key)) return;
        try {
            fn(obj.at(key));
        } catch (const json::exception&) {
            bad_.push_back(qualify(path, key));
        } catch (const InvalidConfig&) {
            bad_.push_back(qualify(path, key));
        }
    }

    [[nodiscard]] const std::vector<std::string>& bad() const { return bad_; }

    static std::string qualify(const std::string& path, std::string_view key) {
        return path.empty() ? std::string(key) : path + "." + std::string(key);
    }

private:
    std::vector<std::string> bad_;
};

ExperimentKind parse_kind(const std::string& s) {
    for (auto k : {ExperimentKind::env, ExperimentKind::selection, ExperimentKind::bandit, ExperimentKind::refinement,
                   ExperimentKind::verify}) {
        if (s == to_string(k)) return k;
    }
    throw InvalidConfig("unknown experiment kind '" + s + "'");
}

Policy parse_policy(const std::string& s) {
    if (s == "thompson") return Policy::thompson;
    if (s == "uniform_random") return Policy::uniform_random;
    throw InvalidConfig("unknown policy '" + s + "'");
}

std::string_view policy_name(Policy p) { return p == Policy::thompson ? "thompson" : "uniform_random"; }

bool probability(double p) { return p >= 0.0 && p <= 1.0; }

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidConfig("cannot write " + path.string());
    out << content;
    if (!out) throw InvalidConfig("write failed for " + path.string());
}

/// Runs `fn(seed_index)` and rethrows the first failure (in seed order) as a
/// SeedFailure.
template <class Fn>
void for_each_unit(std::size_t units, std::size_t threads, const std::vector<std::uint64_t>& unit_seeds, Fn&& fn) {
    std::vector<std::string> errors(units);
    parallel_for(units, threads, [&](std::size_t u) {
        try {
            fn(u);
        } catch (const std::exception& e) {
            errors[u] = e.what();
        }
    });
    for (std::size_t u = 0; u < units; ++u) {
        if (!errors[u].empty()) throw SeedFailure(unit_seeds[u], errors[u]);
    }
}

json selection_cache_key(const ExperimentConfig& cfg) {
    const json full = config_to_json(cfg);
    return {{"environment", full.at("environment")}, {"selection", full.at("selection")}};
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> fields, const std::string& detail)
    : InvalidConfig("invalid config field(s): " + join(fields, ", ") + (detail.empty() ? "" : " (" + detail + ")")),
      fields_(std::move(fields)) {}

SeedFailure::SeedFailure(std::uint64_t seed, const std::string& what)
    : Error("seed " + std::to_string(seed) + " failed: " + what), seed_(seed) {}

std::string_view to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::env: return "env";
        case ExperimentKind::selection: return "selection";
        case ExperimentKind::bandit: return "bandit";
        case ExperimentKind::refinement: return "refinement";
        case ExperimentKind::verify: return "verify";
    }
    return "selection";
}

std::string RefineCondition::label() const {
    if (feedback == FeedbackMode::oracle) return "oracle";
    return reveal_examples ? "self+examples" : "self";
}

void ExperimentConfig::validate() const {
    std::vector<std::string> bad;
    auto need = [&bad](bool ok, const char* field) {
        if (!ok) bad.emplace_back(field);
    };
    need(!seeds.empty(), "seeds");
    need(parallel >= 1, "parallel");
    need(!output_dir.empty(), "output_dir");
    need(environment.domain_size >= 1, "environment.domain_size");
    need(environment.alphabet_size >= 2, "environment.alphabet_size");
    need(environment.ambiguity >= 0.0 && environment.ambiguity < 1.0, "environment.ambiguity");
    need(environment.eval_noise == 0.0, "environment.eval_noise");
    if (kind == ExperimentKind::selection || kind == ExperimentKind::env) {
        need(selection.tasks >= 1, "selection.tasks");
        need(selection.n >= 1, "selection.n");
        need(selection.m >= 1, "selection.m");
        need(selection.k >= 1 && selection.k <= selection.n, "selection.k");
        need(selection.suite_size >= 1, "selection.suite_size");
        need(probability(selection.fidelity), "selection.fidelity");
        need(probability(selection.corruption), "selection.corruption");
        need(!selection.heuristics.empty(), "selection.heuristics");
    }
    if (kind == ExperimentKind::bandit) {
        need(bandit.arms >= 1, "bandit.arms");
        need(bandit.lengthscale > 0.0, "bandit.lengthscale");
        need(bandit.noise_sd > 0.0, "bandit.noise_sd");
        need(bandit.hid_var >= 0.0, "bandit.hid_var");
        need(bandit.horizon >= 1, "bandit.horizon");
        need(bandit.episodes >= 100, "bandit.episodes");
        need(bandit.delta_draws >= 2, "bandit.delta_draws");
    }
    if (kind == ExperimentKind::refinement) {
        need(refinement.rounds >= 1, "refinement.rounds");
        need(refinement.suite_size >= 1, "refinement.suite_size");
        need(probability(refinement.fidelity), "refinement.fidelity");
        need(probability(refinement.corruption), "refinement.corruption");
        need(refinement.example_count >= 1, "refinement.example_count");
        need(!refinement.conditions.empty(), "refinement.conditions");
    }
    if (kind == ExperimentKind::verify) {
        try {
            (void)parse_check_filter(filter);
        } catch (const InvalidConfig& e) {
            throw ConfigError({"filter"}, e.what());
        }
    }
    if (!bad.empty()) throw ConfigError(std::move(bad));
}

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig cfg;
    Reader r;
    r.keys(doc, "", {"kind", "seeds", "parallel", "output_dir", "environment", "selection", "bandit", "refinement",
                     "filter"});
    r.parse(doc, "", "kind", [&](const json& v) { cfg.kind = parse_kind(v.get<std::string>()); });
    r.parse(doc, "", "seeds", [&](const json& v) {
        cfg.seeds = v.is_string() ? parse_seed_list(v.get<std::string>()) : v.get<std::vector<std::uint64_t>>();
    });
    r.get(doc, "", "parallel", cfg.parallel);
    r.parse(doc, "", "output_dir", [&](const json& v) { cfg.output_dir = v.get<std::string>(); });
    r.get(doc, "", "filter", cfg.filter);

    if (doc.is_object() && doc.contains("environment")) {
        const json& e = doc.at("environment");
        r.keys(e, "environment", {"domain_size", "alphabet_size", "ambiguity", "eval_noise"});
        r.get(e, "environment", "domain_size", cfg.environment.domain_size);
        r.get(e, "environment", "alphabet_size", cfg.environment.alphabet_size);
        r.get(e, "environment", "ambiguity", cfg.environment.ambiguity);
        r.get(e, "environment", "eval_noise", cfg.environment.eval_noise);
    }
    if (doc.is_object() && doc.contains("selection")) {
        const json& s = doc.at("selection");
        auto& p = cfg.selection;
        r.keys(s, "selection",
               {"tasks", "n", "m", "k", "suite_size", "fidelity", "corruption", "heuristics", "cache"});
        r.get(s, "selection", "tasks", p.tasks);
        r.get(s, "selection", "n", p.n);
        r.get(s, "selection", "m", p.m);
        r.get(s, "selection", "k", p.k);
        r.get(s, "selection", "suite_size", p.suite_size);
        r.get(s, "selection", "fidelity", p.fidelity);
        r.get(s, "selection", "corruption", p.corruption);
        r.get(s, "selection", "cache", p.cache);
        r.parse(s, "selection", "heuristics", [&](const json& v) {
            p.heuristics.clear();
            if (v.is_string()) {
                p.heuristics = parse_heuristic_list(v.get<std::string>());
            } else {
                for (const auto& h : v) p.heuristics.push_back(parse_heuristic(h.get<std::string>()));
            }
        });
    }
    if (doc.is_object() && doc.contains("bandit")) {
        const json& b = doc.at("bandit");
        auto& p = cfg.bandit;
        r.keys(b, "bandit",
               {"arms", "lengthscale", "noise_sd", "hid_var", "horizon", "episodes", "policy", "delta_draws"});
        r.get(b, "bandit", "arms", p.arms);
        r.get(b, "bandit", "lengthscale", p.lengthscale);
        r.get(b, "bandit", "noise_sd", p.noise_sd);
        r.get(b, "bandit", "hid_var", p.hid_var);
        r.get(b, "bandit", "horizon", p.horizon);
        r.get(b, "bandit", "episodes", p.episodes);
        r.get(b, "bandit", "delta_draws", p.delta_draws);
        r.parse(b, "bandit", "policy", [&](const json& v) { p.policy = parse_policy(v.get<std::string>()); });
    }
    if (doc.is_object() && doc.contains("refinement")) {
        const json& f = doc.at("refinement");
        auto& p = cfg.refinement;
        r.keys(f, "refinement",
               {"rounds", "suite_size", "fidelity", "corruption", "factorization", "compression", "example_count",
                "conditions"});
        r.get(f, "refinement", "rounds", p.rounds);
        r.get(f, "refinement", "suite_size", p.suite_size);
        r.get(f, "refinement", "fidelity", p.fidelity);
        r.get(f, "refinement", "corruption", p.corruption);
        r.get(f, "refinement", "example_count", p.example_count);
        r.parse(f, "refinement", "factorization",
                [&](const json& v) { p.factorization = parse_factorization(v.get<std::string>()); });
        r.parse(f, "refinement", "compression",
                [&](const json& v) { p.compression = parse_compression(v.get<std::string>()); });
        if (f.is_object() && f.contains("conditions")) {
            const json& list = f.at("conditions");
            if (!list.is_array()) {
                r.parse(f, "refinement", "conditions", [](const json&) { throw InvalidConfig("not a list"); });
            } else {
                p.conditions.clear();
                for (std::size_t i = 0; i < list.size(); ++i) {
                    const std::string path = "refinement.conditions[" + std::to_string(i) + "]";
                    RefineCondition c;
                    r.keys(list[i], path, {"feedback", "reveal_examples"});
                    r.parse(list[i], path, "feedback",
                            [&](const json& v) { c.feedback = parse_feedback_mode(v.get<std::string>()); });
                    r.get(list[i], path, "reveal_examples", c.reveal_examples);
                    p.conditions.push_back(c);
                }
            }
        }
    }
    if (!r.bad().empty()) throw ConfigError(r.bad());
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"<file>"}, "cannot read " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError({"<file>"}, path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

json config_to_json(const ExperimentConfig& cfg) {
    json heuristics = json::array();
    for (auto h : cfg.selection.heuristics) heuristics.push_back(to_string(h));
    json conditions = json::array();
    for (const auto& c : cfg.refinement.conditions) {
        conditions.push_back({{"feedback", to_string(c.feedback)}, {"reveal_examples", c.reveal_examples}});
    }
    const auto& s = cfg.selection;
    const auto& b = cfg.bandit;
    const auto& f = cfg.refinement;
    return {
        {"kind", to_string(cfg.kind)},
        {"seeds", cfg.seeds},
        {"parallel", cfg.parallel},
        {"output_dir", cfg.output_dir.generic_string()},
        {"filter", cfg.filter},
        {"environment",
         {{"domain_size", cfg.environment.domain_size},
          {"alphabet_size", cfg.environment.alphabet_size},
          {"ambiguity", cfg.environment.ambiguity},
          {"eval_noise", cfg.environment.eval_noise}}},
        {"selection",
         {{"tasks", s.tasks},
          {"n", s.n},
          {"m", s.m},
          {"k", s.k},
          {"suite_size", s.suite_size},
          {"fidelity", s.fidelity},
          {"corruption", s.corruption},
          {"heuristics", heuristics},
          {"cache", s.cache}}},
        {"bandit",
         {{"arms", b.arms},
          {"lengthscale", b.lengthscale},
          {"noise_sd", b.noise_sd},
          {"hid_var", b.hid_var},
          {"horizon", b.horizon},
          {"episodes", b.episodes},
          {"policy", policy_name(b.policy)},
          {"delta_draws", b.delta_draws}}},
        {"refinement",
         {{"rounds", f.rounds},
          {"suite_size", f.suite_size},
          {"fidelity", f.fidelity},
          {"corruption", f.corruption},
          {"factorization", to_string(f.factorization)},
          {"compression", to_string(f.compression)},
          {"example_count", f.example_count},
          {"conditions", conditions}}},
    };
}

std::vector<std::uint64_t> parse_seed_list(std::string_view list) {
    auto number = [&](std::string_view s) {
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
            throw ConfigError({"seeds"}, "bad seed '" + std::string(s) + "'");
        }
        return v;
    };
    std::vector<std::uint64_t> out;
    std::size_t pos = 0;
    while (pos <= list.size()) {
        const std::size_t comma = std::min(list.find(',', pos), list.size());
        const std::string_view item = list.substr(pos, comma - pos);
        const std::size_t dash = item.find('-');
        if (dash == std::string_view::npos) {
            out.push_back(number(item));
        } else {
            const std::uint64_t lo = number(item.substr(0, dash));
            const std::uint64_t hi = number(item.substr(dash + 1));
            if (hi < lo) throw ConfigError({"seeds"}, "empty range '" + std::string(item) + "'");
            for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
        }
        pos = comma + 1;
    }
    return out;
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
    json doc = config_to_json(cfg);
    doc.erase("parallel");
    doc.erase("output_dir");
    return hex64(fnv1a(canonical_dump(doc)));
}

std::string version() { return ENVAGENT_VERSION; }

json manifest_to_json(const RunManifest& m) {
    json outputs = json::array();
    for (const auto& p : m.outputs) outputs.push_back(p.generic_string());
    return {{"schema_version", kSchemaVersion},
            {"config_hash", m.config_hash},
            {"version", m.version},
            {"kind", m.kind},
            {"seeds", m.seeds},
            {"outputs", outputs},
            {"wall_clock_seconds", m.wall_clock_seconds},
            {"exit_code", m.exit_code}};
}

TaskInstance make_selection_task(const EnvParams& env, const SelectionParams& params, std::uint64_t seed,
                                 std::size_t task) {
    Rng rng = stream_rng(seed, {kSelectionTask, task});
    TaskInstance inst;
    inst.algorithm = sample_algorithm(env.domain_size, env.alphabet_size, env.ambiguity, rng);
    inst.description = sample_description(inst.algorithm, false, rng);
    for (std::size_t i = 0; i < params.n; ++i) {
        inst.codes.push_back(sample_program(inst.description, params.fidelity, rng, i));
    }
    for (std::size_t j = 0; j < params.m; ++j) {
        SuiteOptions opts;
        opts.id = j;
        inst.suites.push_back(sample_test_suite(inst.description, params.suite_size, params.corruption, rng, opts));
    }
    return inst;
}

namespace {

struct TaskMatrices {
    ExecutionMatrix binary;
    ExecutionMatrix raw;
};

TaskMatrices build_matrices(const TaskInstance& inst, std::size_t alphabet_size) {
    return {build_execution_matrix(inst.codes, inst.suites, Environment::binary()),
            build_execution_matrix(inst.codes, inst.suites, Environment::generalized(alphabet_size))};
}

std::vector<SelectionRow> evaluate_task(const TaskInstance& inst, const TaskMatrices& mats,
                                        const SelectionParams& params, std::uint64_t seed, std::size_t task) {
    std::vector<SelectionRow> rows;
    const Environment bin = Environment::binary();
    for (Heuristic h : params.heuristics) {
        ScoreConfig sc;
        sc.seed = derive_seed(seed, {kRandomHeuristic, task});
        sc.k = params.k;
        const SelectionScore s = score(needs_raw_outputs(h) ? mats.raw : mats.binary, h, sc);
        const BehaviorTable& top = inst.codes[s.chosen.front()];
        rows.push_back({seed, task, h, pass_at_k_eval(std::span(&top, 1), inst.algorithm, bin)});
    }
    return rows;
}

}  // namespace

std::vector<SelectionRow> run_selection_task(const EnvParams& env, const SelectionParams& params, std::uint64_t seed,
                                             std::size_t task) {
    const TaskInstance inst = make_selection_task(env, params, seed, task);
    return evaluate_task(inst, build_matrices(inst, env.alphabet_size), params, seed, task);
}

std::string selection_csv(const ExperimentConfig& cfg) {
    const auto& p = cfg.selection;
    const std::size_t seeds = cfg.seeds.size();
    const std::size_t units = seeds * p.tasks;
    std::vector<std::vector<SelectionRow>> rows(units);
    std::vector<std::uint64_t> unit_seeds(units);
    for (std::size_t u = 0; u < units; ++u) unit_seeds[u] = cfg.seeds[u / p.tasks];

    // Optional per-seed matrix caches.
    std::vector<std::vector<TaskMatrices>> cached(seeds);
    const std::filesystem::path cache_dir = cfg.output_dir / "cache";
    const json key = selection_cache_key(cfg);
    if (p.cache) {
        std::filesystem::create_directories(cache_dir);
        for (std::size_t s = 0; s < seeds; ++s) {
            const auto path = cache_dir / ("matrices_seed" + std::to_string(cfg.seeds[s]) + ".json");
            std::ifstream in(path);
            if (!in) continue;
            try {
                const json data = unwrap_snapshot(json::parse(in), "matrix_cache");
                if (data.at("key") != key) continue;
                for (const auto& t : data.at("tasks")) {
                    cached[s].push_back({t.at("binary").get<ExecutionMatrix>(), t.at("raw").get<ExecutionMatrix>()});
                }
                if (cached[s].size() != p.tasks) cached[s].clear();
            } catch (const std::exception&) {
                cached[s].clear();
            }
        }
    }
    std::vector<std::vector<TaskMatrices>> built(seeds, std::vector<TaskMatrices>(p.tasks));

    for_each_unit(units, cfg.parallel, unit_seeds, [&](std::size_t u) {
        const std::size_t s = u / p.tasks;
        const std::size_t task = u % p.tasks;
        const TaskInstance inst = make_selection_task(cfg.environment, p, cfg.seeds[s], task);
        built[s][task] = cached[s].empty() ? build_matrices(inst, cfg.environment.alphabet_size) : cached[s][task];
        rows[u] = evaluate_task(inst, built[s][task], p, cfg.seeds[s], task);
    });

    if (p.cache) {
        for (std::size_t s = 0; s < seeds; ++s) {
            if (!cached[s].empty()) continue;
            json tasks = json::array();
            for (const auto& m : built[s]) tasks.push_back({{"binary", m.binary}, {"raw", m.raw}});
            write_file(cache_dir / ("matrices_seed" + std::to_string(cfg.seeds[s]) + ".json"),
                       canonical_dump(snapshot("matrix_cache", {{"key", key}, {"tasks", tasks}})) + "\n");
        }
    }

    std::ostringstream out;
    CsvWriter w(out, {"seed", "task", "heuristic", "pass_at_1"});
    for (const auto& unit : rows) {
        for (const auto& r : unit) {
            w.row({std::to_string(r.seed), std::to_string(r.task), std::string(to_string(r.heuristic)),
                   std::to_string(r.pass_at_1)});
        }
    }
    return out.str();
}

GPBanditModel make_bandit_model(const BanditParams& params) {
    return GPBanditModel::line_graph(params.arms, params.lengthscale, params.noise_sd, params.hid_var);
}

std::string bandit_csv(const ExperimentConfig& cfg) {
    const GPBanditModel model = make_bandit_model(cfg.bandit);
    std::ostringstream out;
    CsvWriter w(out, {"seed", "round", "regret_obs", "regret_true", "cum_obs", "cum_true", "bound_obs", "bound_true"});
    for (const std::uint64_t seed : cfg.seeds) {
        BoundOptions opts;
        opts.policy = cfg.bandit.policy;
        opts.delta_draws = cfg.bandit.delta_draws;
        opts.threads = cfg.parallel;
        BoundReport rep;
        try {
            rep = verify_bounds(model, cfg.bandit.horizon, cfg.bandit.episodes, seed, opts);
        } catch (const std::exception& e) {
            throw SeedFailure(seed, e.what());
        }
        for (std::size_t t = 0; t < rep.horizon; ++t) {
            w.row({std::to_string(seed), std::to_string(t + 1), format_double(rep.regret_obs[t].mean),
                   format_double(rep.regret_true[t].mean), format_double(rep.cum_regret_obs[t].mean),
                   format_double(rep.cum_regret_true[t].mean), format_double(rep.bound_obs[t]),
                   format_double(rep.bound_true[t])});
        }
    }
    return out.str();
}

Trajectory run_refinement_task(const EnvParams& env, const RefineParams& params, const RefineCondition& cond,
                               std::uint64_t seed) {
    Rng rng = stream_rng(seed, {kRefineTask});
    const AlgorithmSpec alg = sample_algorithm(env.domain_size, env.alphabet_size, env.ambiguity, rng);
    DescriptionOptions dopts;
    dopts.example_count = params.example_count;
    // Always draw the examples so every condition sees the same description
    // apart from the example pairs.
    Description desc = sample_description(alg, true, rng, dopts);
    if (!cond.reveal_examples) desc.example_pairs.clear();

    LoopConfig lc;
    lc.feedback = cond.feedback;
    lc.factorization = params.factorization;
    lc.compression = params.compression;
    lc.rounds = params.rounds;
    lc.suite_size = params.suite_size;
    lc.fidelity = params.fidelity;
    lc.corruption = params.corruption;
    return run_refinement(alg, desc, Environment::binary(), lc, seed);
}

std::string refinement_csv(const ExperimentConfig& cfg) {
    const auto& p = cfg.refinement;
    const std::size_t seeds = cfg.seeds.size();
    const std::size_t units = p.conditions.size() * seeds;
    std::vector<Trajectory> traj(units);
    std::vector<std::uint64_t> unit_seeds(units);
    for (std::size_t u = 0; u < units; ++u) unit_seeds[u] = cfg.seeds[u % seeds];
    for_each_unit(units, cfg.parallel, unit_seeds, [&](std::size_t u) {
        traj[u] = run_refinement_task(cfg.environment, p, p.conditions[u / seeds], cfg.seeds[u % seeds]);
    });

    LoopConfig lc;
    lc.factorization = p.factorization;
    lc.compression = p.compression;
    std::ostringstream out;
    write_trajectory_csv_header(out);
    for (std::size_t u = 0; u < units; ++u) {
        const auto& cond = p.conditions[u / seeds];
        lc.feedback = cond.feedback;
        append_trajectory_csv(out, cfg.seeds[u % seeds], lc, traj[u], cond.label());
    }
    return out.str();
}

RunManifest run(const ExperimentConfig& cfg, const std::function<void(const CheckResult&)>& on_check) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    std::filesystem::create_directories(cfg.output_dir);

    RunManifest m;
    m.config_hash = config_hash(cfg);
    m.version = version();
    m.kind = std::string(to_string(cfg.kind));
    m.seeds = cfg.seeds;

    auto emit = [&](const std::string& name, const std::string& content) {
        const auto path = cfg.output_dir / name;
        write_file(path, content);
        m.outputs.push_back(path);
    };

    switch (cfg.kind) {
        case ExperimentKind::env: {
            for (const std::uint64_t seed : cfg.seeds) {
                json tasks = json::array();
                for (std::size_t t = 0; t < cfg.selection.tasks; ++t) {
                    const TaskInstance inst = make_selection_task(cfg.environment, cfg.selection, seed, t);
                    const TaskMatrices mats = build_matrices(inst, cfg.environment.alphabet_size);
                    tasks.push_back({{"task", t},
                                     {"algorithm", inst.algorithm},
                                     {"description", inst.description},
                                     {"codes", inst.codes},
                                     {"suites", inst.suites},
                                     {"binary_matrix", mats.binary},
                                     {"raw_matrix", mats.raw}});
                }
                emit("env_seed" + std::to_string(seed) + ".json",
                     canonical_dump(snapshot("environment", {{"seed", seed}, {"tasks", tasks}})) + "\n");
            }
            break;
        }
        case ExperimentKind::selection:
            emit("selection.csv", selection_csv(cfg));
            break;
        case ExperimentKind::bandit:
            emit("bandit.csv", bandit_csv(cfg));
            break;
        case ExperimentKind::refinement:
            emit("refinement.csv", refinement_csv(cfg));
            break;
        case ExperimentKind::verify: {
            VerifyOptions vo;
            vo.threads = cfg.parallel;
            vo.seed = cfg.seeds.front();
            std::ostringstream summary;
            CsvWriter w(summary, {"criterion", "check", "passed", "detail"});
            for (const auto& name : parse_check_filter(cfg.filter)) {
                const CheckResult r = run_check(name, vo);
                if (on_check) on_check(r);
                w.row({std::to_string(r.criterion), r.name, r.passed ? "1" : "0", r.detail});
                emit("verify_" + r.name + ".csv", r.csv);
                if (!r.passed) m.exit_code = 1;
            }
            emit("verify.csv", summary.str());
            break;
        }
    }

    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file(cfg.output_dir / "manifest.json", canonical_dump(manifest_to_json(m)) + "\n");
    return m;
}

}  // namespace envagent
