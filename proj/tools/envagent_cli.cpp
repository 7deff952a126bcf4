#include "envagent/experiment.hpp"
#include "envagent/serialize.hpp"
#include "envagent/verify.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;

struct Flags {
    std::string config;
    std::string out;
    std::string seeds;
    std::size_t parallel = 0;
    std::string heuristics;
    std::string filter;
};

void add_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON experiment config");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--seeds", f.seeds, "Seed list, e.g. 0,1,5-9");
    cmd->add_option("--parallel", f.parallel, "Worker threads");
    cmd->add_option("--heuristics", f.heuristics, "Comma-separated heuristic names");
    cmd->add_option("--filter", f.filter, "Comma-separated check names (verify)");
}

envagent::ExperimentConfig build_config(envagent::ExperimentKind kind, const Flags& f) {
    using nlohmann::json;
    json doc = json::object();
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw envagent::ConfigError({"--config"}, "cannot read " + f.config);
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw envagent::ConfigError({"--config"}, e.what());
        }
        if (!doc.is_object()) throw envagent::ConfigError({"<root>"}, "config must be a JSON object");
    }
    const std::string kind_name(envagent::to_string(kind));
    if (doc.contains("kind") && doc["kind"] != kind_name) {
        throw envagent::ConfigError({"kind"}, "config is for '" + doc["kind"].dump() + "', command runs '" +
                                                  kind_name + "'");
    }
    doc["kind"] = kind_name;
    if (!f.out.empty()) doc["output_dir"] = f.out;
    if (!f.seeds.empty()) doc["seeds"] = f.seeds;
    if (f.parallel > 0) doc["parallel"] = f.parallel;
    if (!f.heuristics.empty()) doc["selection"]["heuristics"] = f.heuristics;
    if (!f.filter.empty()) doc["filter"] = f.filter;
    return envagent::parse_config(doc);
}

int execute(envagent::ExperimentKind kind, const Flags& f) {
    const envagent::ExperimentConfig cfg = build_config(kind, f);
    if (kind == envagent::ExperimentKind::verify) {
        const auto m = envagent::run(cfg, [](const envagent::CheckResult& r) {
            std::printf("[%s] %-15s criterion %2d  %s  (%.1fs)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                        r.criterion, r.detail.c_str(), r.seconds);
            std::fflush(stdout);
        });
        std::printf("outputs written to %s\n", cfg.output_dir.string().c_str());
        return m.exit_code == 0 ? kExitOk : kExitCheckFailure;
    }
    const auto m = envagent::run(cfg);
    for (const auto& p : m.outputs) std::printf("%s\n", p.string().c_str());
    std::printf("config hash %s\n", m.config_hash.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic execution-environment experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", envagent::version());

    struct Sub {
        const char* name;
        const char* help;
        envagent::ExperimentKind kind;
    };
    const Sub subs[] = {
        {"gen-env", "Write sampled task instances and execution matrices as JSON", envagent::ExperimentKind::env},
        {"run-selection", "Run the selection benchmark", envagent::ExperimentKind::selection},
        {"run-bandit", "Run Thompson-sampling regret experiments", envagent::ExperimentKind::bandit},
        {"run-refine", "Run refinement-loop trajectories", envagent::ExperimentKind::refinement},
        {"verify", "Run the acceptance checks", envagent::ExperimentKind::verify},
    };
    Flags flags;
    std::vector<std::pair<CLI::App*, envagent::ExperimentKind>> commands;
    for (const auto& s : subs) {
        CLI::App* cmd = app.add_subcommand(s.name, s.help);
        add_flags(cmd, flags);
        commands.emplace_back(cmd, s.kind);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        for (const auto& [cmd, kind] : commands) {
            if (cmd->parsed()) return execute(kind, flags);
        }
    } catch (const envagent::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        for (const auto& field : e.fields()) std::cerr << "  field: " << field << '\n';
        return kExitConfigError;
    } catch (const envagent::InvalidConfig& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitCheckFailure;
    }
    return kExitOk;
}
