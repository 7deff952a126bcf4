#include "envagent/csv.hpp"
#include "envagent/experiment.hpp"
#include "envagent/verify.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace envagent;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("envagent_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> error_fields(const json& doc) {
    try {
        (void)parse_config(doc);
    } catch (const ConfigError& e) {
        return e.fields();
    }
    return {};
}

CsvTable read_table(const fs::path& p) {
    std::ifstream in(p);
    return read_csv(in);
}

}  // namespace

TEST(Config, DefaultsFillMissingKeys) {
    const ExperimentConfig cfg = parse_config(json{{"kind", "selection"}});
    EXPECT_EQ(cfg.selection.n, 10u);
    EXPECT_EQ(cfg.selection.heuristics.size(), kAllHeuristics.size());
    EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{0});
}

TEST(Config, UnknownKeysAreNamed) {
    const json doc = {{"kind", "bandit"}, {"bandit", {{"horizen", 10}}}, {"colour", "red"}};
    const auto fields = error_fields(doc);
    EXPECT_NE(std::find(fields.begin(), fields.end(), "bandit.horizen"), fields.end());
    EXPECT_NE(std::find(fields.begin(), fields.end(), "colour"), fields.end());
}

TEST(Config, InvalidValuesAreNamed) {
    const json doc = {{"kind", "selection"}, {"selection", {{"n", 0}, {"k", 3}, {"fidelity", 1.5}}}};
    const auto fields = error_fields(doc);
    for (const char* f : {"selection.n", "selection.k", "selection.fidelity"}) {
        EXPECT_NE(std::find(fields.begin(), fields.end(), f), fields.end()) << f;
    }
}

TEST(Config, WrongTypesAreNamed) {
    const auto fields = error_fields(json{{"kind", "bandit"}, {"bandit", {{"arms", "eight"}}}});
    EXPECT_EQ(fields, std::vector<std::string>{"bandit.arms"});
}

TEST(Config, BadEnumsAndFilters) {
    EXPECT_FALSE(error_fields(json{{"kind", "selection"}, {"selection", {{"heuristics", "Nope"}}}}).empty());
    EXPECT_FALSE(error_fields(json{{"kind", "teleport"}}).empty());
    EXPECT_EQ(error_fields(json{{"kind", "verify"}, {"filter", "snr,bogus"}}), std::vector<std::string>{"filter"});
    EXPECT_FALSE(error_fields(json{{"kind", "bandit"}, {"bandit", {{"episodes", 50}}}}).empty());
}

TEST(Config, EmptySeedListRejected) {
    EXPECT_FALSE(error_fields(json{{"kind", "selection"}, {"seeds", json::array()}}).empty());
}

TEST(Seeds, ListsAndRanges) {
    EXPECT_EQ(parse_seed_list("0,1,5-9"), (std::vector<std::uint64_t>{0, 1, 5, 6, 7, 8, 9}));
    EXPECT_EQ(parse_seed_list("3"), std::vector<std::uint64_t>{3});
    EXPECT_THROW(parse_seed_list("4-2"), ConfigError);
    EXPECT_THROW(parse_seed_list("x"), ConfigError);
}

TEST(ConfigHash, StableUnderKeyReordering) {
    const json a = json::parse(R"({"kind":"bandit","seeds":[1,2],"bandit":{"arms":4,"horizon":20}})");
    const json b = json::parse(R"({"bandit":{"horizon":20,"arms":4},"seeds":[1,2],"kind":"bandit"})");
    EXPECT_EQ(config_hash(parse_config(a)), config_hash(parse_config(b)));
    const json c = json::parse(R"({"kind":"bandit","seeds":[1,2],"bandit":{"arms":5,"horizon":20}})");
    EXPECT_NE(config_hash(parse_config(a)), config_hash(parse_config(c)));
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
}

TEST(Config, NormalizedDocumentParsesBack) {
    const ExperimentConfig cfg = parse_config(json{{"kind", "refinement"}, {"seeds", "0-3"}});
    const ExperimentConfig again = parse_config(config_to_json(cfg));
    EXPECT_EQ(config_hash(cfg), config_hash(again));
}

TEST(Run, SelectionCsvSchemaAndRowCount) {
    ExperimentConfig cfg = parse_config(json{{"kind", "selection"}, {"seeds", "0-4"}, {"selection", {{"tasks", 3}}}});
    cfg.output_dir = fresh_dir("selection");
    const RunManifest m = run(cfg);
    const CsvTable t = read_table(cfg.output_dir / "selection.csv");
    EXPECT_EQ(t.header, (std::vector<std::string>{"seed", "task", "heuristic", "pass_at_1"}));
    EXPECT_EQ(t.rows.size(), 5u * 3u * kAllHeuristics.size());
    for (const auto& r : t.rows) EXPECT_TRUE(r[3] == "0" || r[3] == "1");
    EXPECT_TRUE(fs::exists(cfg.output_dir / "manifest.json"));
    EXPECT_EQ(m.seeds.size(), 5u);
    fs::remove_all(cfg.output_dir);
}

TEST(Run, IdenticalConfigGivesIdenticalFiles) {
    for (const char* kind : {"selection", "bandit", "refinement"}) {
        json doc = {{"kind", kind}, {"seeds", "0-1"}, {"parallel", 2}};
        doc["selection"] = {{"tasks", 4}};
        doc["bandit"] = {{"episodes", 100}, {"horizon", 10}, {"delta_draws", 2000}};
        doc["refinement"] = {{"rounds", 4}};
        ExperimentConfig a = parse_config(doc);
        ExperimentConfig b = a;
        a.output_dir = fresh_dir(std::string(kind) + "_a");
        b.output_dir = fresh_dir(std::string(kind) + "_b");
        b.parallel = 1;
        const RunManifest ma = run(a);
        const RunManifest mb = run(b);
        ASSERT_EQ(ma.outputs.size(), mb.outputs.size());
        for (std::size_t i = 0; i < ma.outputs.size(); ++i) {
            if (ma.outputs[i].extension() != ".csv") continue;
            EXPECT_EQ(slurp(ma.outputs[i]), slurp(mb.outputs[i])) << ma.outputs[i];
        }
        EXPECT_EQ(ma.config_hash, mb.config_hash) << "parallelism is not part of the experiment identity";
        fs::remove_all(a.output_dir);
        fs::remove_all(b.output_dir);
    }
}

TEST(Run, BanditAndRefinementSchemas) {
    json doc = {{"kind", "bandit"}, {"bandit", {{"episodes", 100}, {"horizon", 6}, {"delta_draws", 1000}}}};
    ExperimentConfig bandit = parse_config(doc);
    bandit.output_dir = fresh_dir("bandit_schema");
    run(bandit);
    const CsvTable bt = read_table(bandit.output_dir / "bandit.csv");
    EXPECT_EQ(bt.header, (std::vector<std::string>{"seed", "round", "regret_obs", "regret_true", "cum_obs",
                                                   "cum_true", "bound_obs", "bound_true"}));
    EXPECT_EQ(bt.rows.size(), 6u);
    fs::remove_all(bandit.output_dir);

    ExperimentConfig refine = parse_config(json{{"kind", "refinement"}, {"refinement", {{"rounds", 3}}}});
    refine.output_dir = fresh_dir("refine_schema");
    run(refine);
    const CsvTable rt = read_table(refine.output_dir / "refinement.csv");
    EXPECT_EQ(rt.header, (std::vector<std::string>{"seed", "round", "oracle_rate", "self_rate", "mode",
                                                   "factorization", "compression"}));
    EXPECT_EQ(rt.rows.size(), 3u * 3u);
    fs::remove_all(refine.output_dir);
}

TEST(Verify, FilterSelection) {
    EXPECT_EQ(parse_check_filter("").size(), 10u);
    EXPECT_EQ(parse_check_filter("snr"), std::vector<std::string>{"snr"});
    EXPECT_EQ(parse_check_filter("kernel,snr").size(), 2u);
    try {
        (void)parse_check_filter("nope");
        FAIL() << "expected InvalidConfig";
    } catch (const InvalidConfig& e) {
        EXPECT_NE(std::string(e.what()).find("reproducibility"), std::string::npos);
    }
}

TEST(Verify, SingleCheckReportsCriterion) {
    VerifyOptions o;
    o.smoke = true;
    const CheckResult r = run_check("passk", o);
    EXPECT_EQ(r.criterion, 4);
    EXPECT_TRUE(r.passed) << r.detail;
    EXPECT_FALSE(r.csv.empty());
}

#ifdef ENVAGENT_CLI_PATH
namespace {

int cli(const std::string& args) {
    const std::string cmd = std::string(ENVAGENT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
    const fs::path dir = fresh_dir("cli");
    fs::create_directories(dir);
    const fs::path bad = dir / "bad.json";
    std::ofstream(bad) << R"({"kind":"selection","selection":{"n":0}})";
    EXPECT_EQ(cli("run-selection --config " + bad.string() + " --out " + (dir / "o1").string()), 2);
    EXPECT_EQ(cli("verify --filter nonsense --out " + (dir / "o2").string()), 2);
    EXPECT_EQ(cli("run-bandit --config " + bad.string()), 2);
    EXPECT_EQ(cli("verify --filter passk,calibration --out " + (dir / "o3").string()), 0);
    EXPECT_EQ(cli("run-selection --seeds 0-1 --heuristics codetsoft,random --out " + (dir / "o4").string()), 0);
    const CsvTable t = read_table(dir / "o4" / "selection.csv");
    EXPECT_EQ(t.rows.size(), 2u * 200u * 2u);
    fs::remove_all(dir);
}
#endif
