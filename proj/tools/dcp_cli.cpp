#include <cstdint>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <utility>

#include <CLI11.hpp>

#include "dcp/config.hpp"
#include "dcp/errors.hpp"
#include "dcp/experiments.hpp"

namespace {

struct cli_options {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
};

// Precedence: --out flag, then config [output] dir, then DCP_OUT_DIR, then ./out.
std::string resolve_out_dir(const std::string& cli_out, const std::string& config_out) {
    if (!cli_out.empty()) return cli_out;
    if (!config_out.empty()) return config_out;
    if (const char* env = std::getenv("DCP_OUT_DIR"); env != nullptr && *env != '\0') return env;
    return "out";
}

int run_kind(dcp::experiment_kind kind, const cli_options& opt) {
    dcp::ExperimentConfig config;
    if (!opt.config_path.empty()) config = dcp::load_config_file(opt.config_path);
    config.kind = kind;
    if (opt.seed_set) config.mc.seed = opt.seed;
    if (opt.workers > 0) config.mc.workers = opt.workers;
    const std::string out_dir = resolve_out_dir(opt.out_dir, config.output.dir);
    const dcp::RunResult result = dcp::run_experiment(config, out_dir);
    for (const auto& check : result.checks) {
        std::cout << (check.pass ? "PASS " : "FAIL ") << check.name << ": " << check.detail
                  << "\n";
    }
    std::cout << "manifest " << result.manifest_hash << "\n";
    for (const auto& file : result.files) std::cout << "wrote " << file << "\n";
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"drift-control solver and simulator suite"};
    app.set_version_flag("--version", std::string(dcp::tool_version));
    app.require_subcommand(1);

    const std::pair<const char*, dcp::experiment_kind> kinds[] = {
        {"sweep-wr", dcp::experiment_kind::sweep_wr},
        {"solve", dcp::experiment_kind::solve},
        {"verify-dcp", dcp::experiment_kind::verify_dcp},
        {"converge-qcp", dcp::experiment_kind::converge_qcp},
        {"conjugate-table", dcp::experiment_kind::conjugate_table},
    };
    const char* const descriptions[] = {
        "classify shooting trajectories over an r grid",
        "solve the value function and feedback policy",
        "Monte Carlo verification of the solved value function",
        "queue-to-diffusion convergence study",
        "tabulate conjugates against a brute-force oracle",
    };

    cli_options opt;
    int exit_code = 0;
    for (size_t i = 0; i < 5; ++i) {
        CLI::App* sub = app.add_subcommand(kinds[i].first, descriptions[i]);
        sub->add_option("--config", opt.config_path, "config file path");
        sub->add_option("--out", opt.out_dir, "output directory");
        CLI::Option* seed_opt = sub->add_option("--seed", opt.seed, "Monte Carlo base seed");
        sub->add_option("--workers", opt.workers, "Monte Carlo worker threads");
        const dcp::experiment_kind kind = kinds[i].second;
        sub->callback([&opt, &exit_code, kind, seed_opt]() {
            opt.seed_set = seed_opt->count() > 0;
            exit_code = run_kind(kind, opt);
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return exit_code;
}
