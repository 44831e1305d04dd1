#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "errdyn/harness.hpp"

using namespace errdyn;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const fs::path& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

void expect_config_error(const nlohmann::json& doc, const std::string& needle) {
    try {
        parse_config_json(doc);
        FAIL_CHECK(("expected a ConfigError mentioning: " + needle));
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
}

}  // namespace

TEST_CASE("a minimal config document fills in the documented defaults") {
    const RunConfig cfg = parse_config_json({{"experiment", "hsao"}});
    CHECK(cfg.experiment == "hsao");
    CHECK(cfg.out_dir == "runs/out");
    REQUIRE(cfg.seeds.size() == 1);
    CHECK(cfg.seeds[0] == 0);
    CHECK(cfg.budget == 1000);
    CHECK(cfg.ablation.empty());
    CHECK(cfg.hsao.alpha0 == 0.01);
    CHECK(cfg.hsao.diag.alpha == 0.02);
    CHECK(cfg.agent.diag.beta == 0.02);
    CHECK(cfg.env.n_states == 7);
    CHECK(cfg.mllp.K == 10);
    CHECK(cfg.mllp.es.iters == 300);
}

TEST_CASE("config validation points at the offending key") {
    expect_config_error(nlohmann::json::object(), "experiment");
    expect_config_error({{"experiment", "adam"}}, "experiment");
    expect_config_error({{"experiment", "hsao"}, {"alpha0", 0.1}}, "alpha0");
    expect_config_error({{"experiment", "hsao"}, {"hsao", {{"alpha00", 0.1}}}},
                        "hsao.alpha00");
    expect_config_error({{"experiment", "hsao"}, {"seeds", "3"}}, "seeds");
    expect_config_error(
        {{"experiment", "hsao"}, {"seeds", nlohmann::json::array()}}, "seeds");
    expect_config_error({{"experiment", "hsao"}, {"budget", 0}}, "budget");
    expect_config_error({{"experiment", "hsao"}, {"ablation", {"foo"}}},
                        "ablation");
    expect_config_error({{"experiment", "hsao"}, {"diag", {{"alpha", 2.0}}}},
                        "diag");
    expect_config_error({{"experiment", "hsao"}, {"task", {{"dimension", 0}}}},
                        "task");
    expect_config_error(
        {{"experiment", "hedrl"}, {"schedule", {{"noise_inject_std", -1.0}}}},
        "schedule");
    expect_config_error(
        {{"experiment", "mllp"}, {"mllp", {{"task", {{"kind", "cubic"}}}}}},
        "kind");

    CHECK_THROWS_AS(parse_config_file("/nonexistent/errdyn.json"), ConfigError);
    const fs::path bad = fs::temp_directory_path() / "errdyn_bad_config.json";
    {
        std::ofstream out(bad);
        out << "{nope";
    }
    CHECK_THROWS_AS(parse_config_file(bad.string()), ConfigError);
    fs::remove(bad);
}

TEST_CASE("the config hash ignores where outputs are written") {
    const nlohmann::json a{{"experiment", "hsao"}, {"out_dir", "x"}};
    const nlohmann::json b{{"experiment", "hsao"}, {"out_dir", "y"}};
    const nlohmann::json c{{"experiment", "hsao"},
                           {"out_dir", "x"},
                           {"hsao", {{"alpha0", 0.5}}}};
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a) != config_hash(c));
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
}

TEST_CASE("ablation masks switch off exactly the named components") {
    const HsaoConfig base;
    const HsaoConfig one = apply_ablation(base, {"bias_gate"});
    CHECK_FALSE(one.use_bias_gate);
    CHECK(one.use_noise_gate);
    CHECK(one.use_alignment);
    const HsaoConfig all = apply_ablation(
        base, {"bias_gate", "noise_gate", "alignment_correction"});
    CHECK_FALSE(all.use_bias_gate);
    CHECK_FALSE(all.use_noise_gate);
    CHECK_FALSE(all.use_alignment);
    CHECK(apply_ablation(base, {}).use_bias_gate);
}

TEST_CASE("single supervised runs are budget-sized and seed-reproducible") {
    TaskConfig tc;
    tc.dimension = 4;
    const HsaoConfig hc;
    const HsaoRunResult r1 = run_hsao_single(tc, hc, 50, 7);
    const HsaoRunResult r2 = run_hsao_single(tc, hc, 50, 7);
    const HsaoRunResult r3 = run_hsao_single(tc, hc, 50, 8);
    REQUIRE(r1.rows.size() == 50);
    CHECK(r1.rows.front().t == 1);
    CHECK((r1.theta.array() == r2.theta.array()).all());
    CHECK(r1.final_loss == r2.final_loss);
    CHECK(r1.final_oracle == r2.final_oracle);
    CHECK(r1.rows.back().alpha_eff == r2.rows.back().alpha_eff);
    CHECK(r1.final_loss != r3.final_loss);
}

TEST_CASE("the reward-noise schedule kicks in at its episode") {
    const ChainConfig env;
    const AgentConfig agent;
    ScheduleConfig sched;
    sched.noise_inject_episode = 3;
    sched.noise_inject_std = 0.5;
    const HedrlRunResult quiet =
        run_hedrl_single(env, agent, ScheduleConfig{}, 6, 11);
    const HedrlRunResult noisy = run_hedrl_single(env, agent, sched, 6, 11);
    REQUIRE(quiet.returns.size() == 6);
    REQUIRE(noisy.returns.size() == 6);
    REQUIRE(quiet.lengths.size() == 6);
    for (int ep = 0; ep < 3; ++ep) {
        CHECK(quiet.returns[std::size_t(ep)] == noisy.returns[std::size_t(ep)]);
    }
    bool differs = false;
    for (int ep = 3; ep < 6; ++ep) {
        differs = differs ||
                  quiet.returns[std::size_t(ep)] != noisy.returns[std::size_t(ep)];
    }
    CHECK(differs);
}

TEST_CASE("run writes traces, a summary, and a manifest") {
    const fs::path dir = fresh_dir("errdyn_run_hsao");
    const nlohmann::json doc{{"experiment", "hsao"},
                             {"budget", 40},
                             {"seeds", {1, 2}},
                             {"out_dir", dir.string()}};
    const RunConfig cfg = parse_config_json(doc);
    run_command(cfg, 1);

    REQUIRE(fs::exists(dir / "hsao-full-s1.jsonl"));
    REQUIRE(fs::exists(dir / "hsao-full-s2.jsonl"));

    const auto summary = lines_of(dir / "summary.csv");
    REQUIRE(summary.size() == 3);
    CHECK(summary[0] ==
          "version,experiment,run_id,seed,steps,final_loss,final_oracle,"
          "update_norm_variance,overshoot_count");
    CHECK(summary[1].find("1,hsao,hsao-full-s1,1,40,") == 0);

    const nlohmann::json manifest =
        nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest.at("schema") == "errdyn-manifest");
    CHECK(manifest.at("status") == "ok");
    CHECK(manifest.at("experiment") == "hsao");
    CHECK(manifest.at("config_hash") == config_hash(cfg.canonical));
    CHECK(manifest.at("files").size() == 2);
    CHECK(manifest.at("variants") == nlohmann::json{"full"});
    CHECK(manifest.at("seeds") == nlohmann::json{1, 2});

    const auto trace = lines_of(dir / "hsao-full-s1.jsonl");
    REQUIRE(trace.size() == 41);  // header + one row per step
    const nlohmann::json header = nlohmann::json::parse(trace[0]);
    CHECK(header.at("schema") == "errdyn-trace");
    CHECK(header.at("version") == kTraceSchemaVersion);
    CHECK(header.at("run_id") == "hsao-full-s1");
    CHECK(header.at("variant") == "full");
    CHECK(header.at("seed") == 1);
    CHECK(header.at("diag").at("alpha") == 0.02);
    const nlohmann::json row = nlohmann::json::parse(trace[1]);
    CHECK(row.at("step") == 1);
    CHECK(row.contains("error"));
    CHECK(row.contains("rho_bias"));
    CHECK(row.contains("kappa"));
    CHECK(row.contains("alpha_eff"));

    // the logged diagnostics must be recomputable from the error column
    CHECK(replay_max_err((dir / "hsao-full-s1.jsonl").string()) <= 1e-10);
}

TEST_CASE("worker count never changes the outputs") {
    const fs::path d1 = fresh_dir("errdyn_jobs1");
    const fs::path d2 = fresh_dir("errdyn_jobs3");
    auto doc = [](const fs::path& dir) {
        return nlohmann::json{{"experiment", "hsao"},
                              {"budget", 30},
                              {"seeds", {0, 1, 2}},
                              {"out_dir", dir.string()}};
    };
    run_command(parse_config_json(doc(d1)), 1);
    run_command(parse_config_json(doc(d2)), 3);
    for (const char* name :
         {"hsao-full-s0.jsonl", "hsao-full-s1.jsonl", "hsao-full-s2.jsonl",
          "summary.csv", "manifest.json"}) {
        CHECK(slurp(d1 / name) == slurp(d2 / name));
    }
}

TEST_CASE("a diverging run fails loudly but keeps its outputs") {
    const fs::path dir = fresh_dir("errdyn_run_fail");
    const nlohmann::json doc{{"experiment", "hsao"},
                             {"budget", 5},
                             {"seeds", {0}},
                             {"out_dir", dir.string()},
                             {"hsao", {{"alpha0", 1e308}}}};
    CHECK_THROWS_AS(run_command(parse_config_json(doc), 1), NumericFailure);
    const nlohmann::json manifest =
        nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest.at("status") == "failed");
    CHECK(std::string(manifest.at("message")).find("non-finite") !=
          std::string::npos);
}

TEST_CASE("ablation runs are a supervised-optimizer tool") {
    nlohmann::json doc{{"experiment", "hedrl"},
                       {"budget", 3},
                       {"ablation", {"bias_gate"}},
                       {"out_dir",
                        (fs::temp_directory_path() / "errdyn_na").string()}};
    CHECK_THROWS_AS(run_command(parse_config_json(doc), 1), ConfigError);
    doc.erase("ablation");
    CHECK_THROWS_AS(ablate_command(parse_config_json(doc), 1), ConfigError);
    doc["experiment"] = "mllp";
    doc["ablation"] = {"noise_gate"};
    CHECK_THROWS_AS(run_command(parse_config_json(doc), 1), ConfigError);
}

TEST_CASE("ablate fans out over the component grid and reports ratios") {
    const fs::path dir = fresh_dir("errdyn_ablate");
    const nlohmann::json doc{{"experiment", "hsao"},
                             {"budget", 40},
                             {"seeds", {1, 2}},
                             {"out_dir", dir.string()},
                             {"task", {{"noise_std", 0.5}}}};
    ablate_command(parse_config_json(doc), 2);

    for (const char* name :
         {"hsao-full-s1.jsonl", "hsao-ablated-bias_gate-s2.jsonl",
          "hsao-ablated-noise_gate-s1.jsonl",
          "hsao-ablated-alignment_correction-s2.jsonl"}) {
        CHECK(fs::exists(dir / name));
    }
    const auto table = lines_of(dir / "ablate.csv");
    REQUIRE(table.size() == 9);  // header + 4 variants x 2 seeds
    CHECK(table[0] ==
          "version,variant,seed,final_loss,final_oracle,update_norm_variance,"
          "overshoot_count");
    const auto ratios = lines_of(dir / "ablate_ratios.csv");
    REQUIRE(ratios.size() == 7);  // header + 3 variants x 2 metrics
    CHECK(ratios[0] == "version,variant,metric,median_ratio");
    const nlohmann::json manifest =
        nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest.at("variants").size() == 4);
    CHECK(manifest.at("status") == "ok");
}

TEST_CASE("report pairs the adaptive agent with its baseline") {
    const fs::path dir = fresh_dir("errdyn_hedrl_pair");
    auto mk = [&dir](bool baseline) {
        return parse_config_json(
            nlohmann::json{{"experiment", "hedrl"},
                           {"budget", 6},
                           {"seeds", {5}},
                           {"out_dir", dir.string()},
                           {"agent", {{"baseline_mode", baseline}}}});
    };
    run_command(mk(false), 1);
    run_command(mk(true), 1);
    REQUIRE(fs::exists(dir / "hedrl-full-s5.jsonl"));
    REQUIRE(fs::exists(dir / "hedrl-baseline-s5.jsonl"));
    CHECK(replay_max_err((dir / "hedrl-full-s5.jsonl").string()) <= 1e-10);

    const fs::path rep = fresh_dir("errdyn_hedrl_report");
    report_command(dir.string(), rep.string());
    const auto agg = lines_of(rep / "aggregate.csv");
    REQUIRE(agg.size() > 1);
    CHECK(agg[0] == "version,variant,step,column,mean,std,n");
    const auto pair = lines_of(rep / "entropy_pair.csv");
    REQUIRE(pair.size() == 7);  // header + one row per episode
    CHECK(pair[0] == "version,episode,beta_H_baseline,beta_H_full");
}

TEST_CASE("report rejects directories it cannot aggregate") {
    const fs::path out = fresh_dir("errdyn_report_out");
    CHECK_THROWS_AS(report_command("/nonexistent/traces", out.string()),
                    ConfigError);

    const fs::path empty = fresh_dir("errdyn_report_empty");
    CHECK_THROWS_AS(report_command(empty.string(), out.string()), ConfigError);

    const fs::path foreign = fresh_dir("errdyn_report_foreign");
    {
        std::ofstream f(foreign / "x.jsonl");
        f << nlohmann::json{{"schema", "other"}}.dump() << "\n";
    }
    CHECK_THROWS_AS(report_command(foreign.string(), out.string()), ConfigError);

    // one supervised and one agent trace cannot share an aggregate
    const fs::path ha = fresh_dir("errdyn_report_ha");
    const nlohmann::json hsao_doc{{"experiment", "hsao"},
                                  {"budget", 5},
                                  {"seeds", {0}},
                                  {"out_dir", ha.string()}};
    run_command(parse_config_json(hsao_doc), 1);
    const fs::path hb = fresh_dir("errdyn_report_hb");
    const nlohmann::json hedrl_doc{{"experiment", "hedrl"},
                                   {"budget", 3},
                                   {"seeds", {0}},
                                   {"out_dir", hb.string()}};
    run_command(parse_config_json(hedrl_doc), 1);
    const fs::path mixed = fresh_dir("errdyn_report_mixed");
    fs::copy_file(ha / "hsao-full-s0.jsonl", mixed / "hsao-full-s0.jsonl");
    fs::copy_file(hb / "hedrl-full-s0.jsonl", mixed / "hedrl-full-s0.jsonl");
    CHECK_THROWS_AS(report_command(mixed.string(), out.string()), ConfigError);
}

TEST_CASE("a small meta-learning run round-trips through its trace") {
    const fs::path dir = fresh_dir("errdyn_run_mllp");
    const nlohmann::json doc{
        {"experiment", "mllp"},
        {"seeds", {0}},
        {"out_dir", dir.string()},
        {"mllp",
         {{"K", 3},
          {"hidden", {4}},
          {"heldout_tasks", 2},
          {"task", {{"dimension", 3}}},
          {"es",
           {{"pairs", 1},
            {"batch", 1},
            {"iters", 1},
            {"val_tasks", 1},
            {"val_every", 1}}}}}};
    run_command(parse_config_json(doc), 1);

    const fs::path trace = dir / "mllp-full-s0.jsonl";
    REQUIRE(fs::exists(trace));
    const auto lines = lines_of(trace);
    CHECK(lines.size() == 1 + 2 * 3);  // header + heldout_tasks x K rows
    const auto summary = lines_of(dir / "summary.csv");
    REQUIRE(summary.size() == 4);  // header + two val points + heldout mean
    CHECK(summary[0] == "version,experiment,run_id,seed,kind,index,value");
    CHECK(summary[3].find("heldout_mean") != std::string::npos);

    // held-out traces concatenate tasks; the replay restarts at each t == 1
    CHECK(replay_max_err(trace.string()) <= 1e-10);
}
