#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "errdyn/acceptance.hpp"
#include "errdyn/harness.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> seeds;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        const std::string tok = csv.substr(
            pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (tok.empty()) {
            throw errdyn::ConfigError("bad --seeds entry (empty field)");
        }
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            seeds.push_back(v);
        } catch (const std::exception&) {
            throw errdyn::ConfigError("bad --seeds entry: " + tok);
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (seeds.empty()) throw errdyn::ConfigError("--seeds list is empty");
    return seeds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"error-dynamics optimizer toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seeds_csv, trace_dir;
    int jobs = 1;

    CLI::App* run_cmd = app.add_subcommand("run", "execute one experiment");
    run_cmd->add_option("--config", config_path, "config file (json)")
        ->required();
    run_cmd->add_option("--out", out_dir, "output directory override");
    run_cmd->add_option("--seeds", seeds_csv, "comma-separated seed list");
    run_cmd->add_option("--jobs", jobs, "parallel runs");

    CLI::App* ablate_cmd =
        app.add_subcommand("ablate", "full vs single-component-off sweeps");
    ablate_cmd->add_option("--config", config_path, "config file (json)")
        ->required();
    ablate_cmd->add_option("--out", out_dir, "output directory override");
    ablate_cmd->add_option("--seeds", seeds_csv, "comma-separated seed list");
    ablate_cmd->add_option("--jobs", jobs, "parallel runs");

    CLI::App* report_cmd =
        app.add_subcommand("report", "aggregate a directory of trace files");
    report_cmd->add_option("traces", trace_dir, "directory with .jsonl traces")
        ->required();
    report_cmd->add_option("--out", out_dir, "output directory")->required();

    CLI::App* accept_cmd =
        app.add_subcommand("accept", "run the acceptance criteria suite");
    (void)accept_cmd;

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*accept_cmd) {
            return errdyn::acceptance_main();
        }
        if (*report_cmd) {
            errdyn::report_command(trace_dir, out_dir);
            return 0;
        }
        errdyn::RunConfig cfg = errdyn::parse_config_file(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!seeds_csv.empty()) cfg.seeds = parse_seed_list(seeds_csv);
        if (jobs < 1) throw errdyn::ConfigError("--jobs must be >= 1");
        if (*run_cmd) {
            errdyn::run_command(cfg, jobs);
        } else if (*ablate_cmd) {
            errdyn::ablate_command(cfg, jobs);
        }
        return 0;
    } catch (const errdyn::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const errdyn::NumericFailure& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
