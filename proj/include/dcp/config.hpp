#ifndef DCP_CONFIG_HPP
#define DCP_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dcp/cost_model.hpp"
#include "dcp/hjb_solver.hpp"

namespace dcp {

enum class experiment_kind { sweep_wr, solve, verify_dcp, converge_qcp, conjugate_table };

const char* to_string(experiment_kind kind);
experiment_kind experiment_kind_from_string(const std::string& name);

// Problem block: DcpParams numbers plus the cost family by name, so the whole
// config stays plain text.
struct DcpBlock {
    double sigma = 1.0;
    double theta = 0.5;
    double alpha = 0.5;
    double p = 1.0;
    std::string cost_family = "exponential";  // exponential | reciprocal
    double cost_beta = 5.0;
};

struct McBlock {
    double dt = 1e-3;
    double horizon = 40.0;
    double x0 = 0.0;
    long n_paths = 100000;
    std::uint64_t seed = 12345;
    int workers = 1;
    double budget = 0.02;  // absolute slack added to the 3 SE band
};

struct QueueBlock {
    std::vector<long> n_list = {25, 100, 400, 1600};
    double epsilon0 = 0.1;
    double patience_slope = 0.5;
    bool patience_infinite = false;
    std::string service = "deterministic";  // deterministic | gamma
    double service_variance = 0.0;
    long n_paths = 20000;
    double x0_hat = 0.0;
    double budget = 0.05;
};

struct SweepBlock {
    std::vector<double> r_values;  // empty means auto-spaced around r*
    int count = 7;
};

struct OutputBlock {
    std::string dir;  // empty means CLI --out / environment / ./out
    std::string format = "csv";
};

struct ExperimentConfig {
    experiment_kind kind = experiment_kind::solve;
    DcpBlock dcp;
    ShootingConfig shooting;
    McBlock mc;
    QueueBlock queue;
    SweepBlock sweep;
    OutputBlock output;

    void validate() const;
};

// Builds the cost function named by the dcp block (parameter_error on an
// unknown family name).
CostFunction build_cost(const DcpBlock& dcp);
DcpParams to_dcp_params(const ExperimentConfig& config);

// Block-structured text: [section] headers and key = value lines; '#' and ';'
// start comments.  Unknown sections or keys fail with their field path.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Emits every block and key in a fixed order with %.17g numbers, so
// parse(serialize(c)) == c and serialize is idempotent.
std::string serialize_config(const ExperimentConfig& config);

}  // namespace dcp

#endif
