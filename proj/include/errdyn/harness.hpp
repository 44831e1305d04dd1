#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "errdyn/envs.hpp"
#include "errdyn/hedrl.hpp"
#include "errdyn/hsao.hpp"
#include "errdyn/mllp.hpp"
#include "errdyn/tasks.hpp"

namespace errdyn {

inline constexpr int kTraceSchemaVersion = 1;
inline constexpr int kSummarySchemaVersion = 1;

// Config/usage problems; the CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric breakdown at run time; the CLI maps these to exit code 3.
struct NumericFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScheduleConfig {
    long noise_inject_episode = -1;  // <0: no injection
    double noise_inject_std = 0.0;
};

struct MllpRunConfig {
    double alpha_max = 0.1;
    double gamma = 0.9;
    double eta = 0.9;
    double tau = 0.25;
    double epsilon = 1e-8;
    int K = 10;
    std::vector<Eigen::Index> hidden{16, 16};
    MetaTaskConfig task;
    EsConfig es;
    int heldout_tasks = 20;
    std::uint64_t heldout_seed_base = 50000;
    std::uint64_t init_seed_base = 1000;
};

struct RunConfig {
    std::string experiment;  // hsao | hedrl | mllp
    std::string out_dir = "runs/out";
    std::vector<std::uint64_t> seeds{0};
    long budget = 1000;
    std::set<std::string> ablation;  // of {bias_gate, noise_gate, alignment_correction}

    HsaoConfig hsao;
    TaskConfig task;
    AgentConfig agent;
    ChainConfig env;
    ScheduleConfig schedule;
    MllpRunConfig mllp;

    nlohmann::json canonical;  // parsed document, for hashing
};

RunConfig parse_config_json(const nlohmann::json& doc);
RunConfig parse_config_file(const std::string& path);

std::uint64_t fnv1a64(const std::string& bytes);
// Hash of the canonical config dump with non-semantic fields removed.
std::string config_hash(const nlohmann::json& canonical);

HsaoConfig apply_ablation(HsaoConfig config, const std::set<std::string>& mask);

// ------- single runs (in-memory, used by the CLI and the acceptance suite)

struct HsaoRunResult {
    std::vector<HsaoStepInfo> rows;
    Eigen::VectorXd theta;
    double final_loss = 0.0;    // last sampled loss
    double final_oracle = 0.0;  // population loss at the final iterate
};

HsaoRunResult run_hsao_single(const TaskConfig& task_cfg,
                              const HsaoConfig& opt_cfg, long budget,
                              std::uint64_t seed);

struct HedrlRunResult {
    std::vector<HedrlStepInfo> rows;
    std::vector<double> returns;
    std::vector<long> lengths;
};

HedrlRunResult run_hedrl_single(const ChainConfig& env_cfg,
                                const AgentConfig& agent_cfg,
                                const ScheduleConfig& schedule, long episodes,
                                std::uint64_t seed);

struct MllpRunResult {
    MetaTrainResult train;
    double heldout_mean = 0.0;
    std::vector<InnerStepInfo> rows;  // held-out adaptation traces
};

MllpRunResult run_mllp_single(const MllpRunConfig& cfg, std::uint64_t seed);

// ------- commands (file-emitting); throw ConfigError / NumericFailure

void run_command(const RunConfig& config, int jobs);
void ablate_command(const RunConfig& config, int jobs);
void report_command(const std::string& trace_dir, const std::string& out_dir);

// Largest deviation between logged diagnostics and an offline recomputation
// from the logged error column of one trace file.
double replay_max_err(const std::string& trace_path);

}  // namespace errdyn
