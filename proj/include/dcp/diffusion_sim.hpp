#ifndef DCP_DIFFUSION_SIM_HPP
#define DCP_DIFFUSION_SIM_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dcp/hjb_solver.hpp"
#include "dcp/mc_stats.hpp"

namespace dcp {

enum class policy_kind { zero, constant, feedback };

// A state-feedback drift control u(x) >= 0 for the reflected diffusion.
struct ControlPolicy {
    policy_kind kind = policy_kind::zero;
    double constant_u = 0.0;
    std::shared_ptr<const ValueFunctionSolution> sol;  // feedback only

    static ControlPolicy zero_control();
    static ControlPolicy constant_control(double u);
    static ControlPolicy feedback_from_solution(std::shared_ptr<const ValueFunctionSolution> sol);
};

// Summary of one simulated path with discounted cost bookkeeping.
struct PathRealization {
    std::uint64_t seed = 0;
    double dt = 0.0;
    double horizon = 0.0;
    double control_cost = 0.0;          // int_0^T e^{-alpha t} C(u(X_t)) dt, per-step exact weights
    double idle_cost = 0.0;             // p sum_k e^{-alpha t_k} dL_k
    double idle_cost_rewritten = 0.0;   // p (alpha int e^{-alpha t} L dt + e^{-alpha T} L(T))
    double local_time = 0.0;            // L(T)
    double terminal_state = 0.0;
    double max_state = 0.0;
    long clip_events = 0;               // policy evaluations clipped away from 0-
    long reflect_steps = 0;
    long n_steps = 0;

    double total() const { return control_cost + idle_cost; }
    double total_rewritten() const { return control_cost + idle_cost_rewritten; }
};

// Full per-step record of one path, for legality tests.
struct ReflectedPathTrace {
    PathRealization summary;
    std::vector<double> x;   // X_1 .. X_N (post-step states)
    std::vector<double> dl;  // local-time increments per step
};

// Discrete Skorokhod reflection of a free path fed increment by increment:
// x = z + max(0, running sup of -z), and the pushing term is the local time.
struct SkorokhodState {
    double z = 0.0;
    double sup_neg = 0.0;  // running sup of (-z)^+
    double x = 0.0;
    double local_time = 0.0;

    explicit SkorokhodState(double z0 = 0.0)
        : z(z0), sup_neg(z0 < 0.0 ? -z0 : 0.0), x(z + sup_neg), local_time(sup_neg) {}
    void update(double dz) {
        z += dz;
        if (-z > sup_neg) sup_neg = -z;
        x = z + sup_neg;
        local_time = sup_neg;
    }
};

// One projection-Euler path: proposed = X_k + (-u(X_k) - theta X_k) dt
// + sigma sqrt(dt) Z_k; X_{k+1} = max(0, proposed); dL_k = max(0, -proposed).
// Control cost uses the exact per-step discount integral, local time the
// discount at the step start.  sigma = 0 is allowed as a noiseless test mode.
PathRealization simulate_reflected_path(const DcpParams& params, const ControlPolicy& policy,
                                        double x0, double dt, double horizon, std::uint64_t seed);

ReflectedPathTrace simulate_reflected_path_trace(const DcpParams& params,
                                                 const ControlPolicy& policy, double x0, double dt,
                                                 double horizon, std::uint64_t seed);

// Monte Carlo over independent seeds base_seed .. base_seed + n_paths - 1.
// workers > 1 farms contiguous seed blocks; the reduction is in block order,
// so results are bit-identical for a fixed worker count.
CostEstimate estimate_cost(const DcpParams& params, const ControlPolicy& policy, double x0,
                           double dt, double horizon, long n_paths, std::uint64_t base_seed,
                           int workers = 1, double tail_rate_bound = 4.0);

struct PolicyReport {
    std::string label;
    CostEstimate estimate;
    bool is_feedback = false;
    bool pass = false;
    std::string check;  // human-readable statement of the inequality tested
};

struct DominanceReport {
    double q_x0 = 0.0;
    std::vector<PolicyReport> rows;
    bool all_pass = false;
};

struct McConfig {
    double dt = 1e-3;
    double horizon = 40.0;
    long n_paths = 100000;
    std::uint64_t base_seed = 12345;
    int workers = 1;
    double budget = 0.02;  // absolute slack added to 3 SE in the feedback check
    double tail_rate_bound = 4.0;
};

// Estimates every policy and checks the value-function bounds: the feedback
// policy must match Q(x0) within 3 SE + budget, every alternative must cost
// at least Q(x0) - 3 SE - budget.  Failures are recorded, not thrown.
DominanceReport dominance_report(const DcpParams& params, const ValueFunctionSolution& sol,
                                 double x0, const std::vector<ControlPolicy>& policies,
                                 const McConfig& mc);

}  // namespace dcp

#endif
