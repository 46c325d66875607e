#ifndef DCP_EXPERIMENTS_HPP
#define DCP_EXPERIMENTS_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dcp/config.hpp"

namespace dcp {

inline constexpr const char* tool_version = "1.0.0";

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;  // measured value vs bound, human readable
};

// One experiment run: files written (CSV tables plus a JSON manifest), the
// acceptance-style checks evaluated, and the manifest hash stamped into every
// output file.  exit_code is 0 iff every check passed.
struct RunResult {
    int exit_code = 0;
    std::vector<CheckResult> checks;
    std::vector<std::string> files;
    std::string manifest_hash;
};

// FNV-1a 64-bit hash of a byte string; the manifest hash is computed over the
// key-sorted JSON serialization excluding the timestamp and hash fields, so
// re-running the same config reproduces it.
std::uint64_t fnv1a64(std::string_view bytes);

RunResult run_solve(const ExperimentConfig& config, const std::string& out_dir);
RunResult run_sweep_wr(const ExperimentConfig& config, const std::string& out_dir);
RunResult run_verify_dcp(const ExperimentConfig& config, const std::string& out_dir);
RunResult run_converge_qcp(const ExperimentConfig& config, const std::string& out_dir);
RunResult run_conjugate_table(const ExperimentConfig& config, const std::string& out_dir);

// Dispatch on config.kind.
RunResult run_experiment(const ExperimentConfig& config, const std::string& out_dir);

}  // namespace dcp

#endif
