#ifndef DCP_QUEUE_SIM_HPP
#define DCP_QUEUE_SIM_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "dcp/hjb_solver.hpp"
#include "dcp/mc_stats.hpp"

namespace dcp {

enum class service_family { deterministic, gamma };

// Service requirement distribution; mean is fixed to 1 analytically, variance
// selects the gamma shape (deterministic means variance 0).
struct ServiceSpec {
    service_family family = service_family::deterministic;
    double variance = 0.0;
};

// Patience CDF family F(y) = min(slope y, 1), i.e. Uniform(0, 1/slope); its
// diffusion limit is H(y) = slope * y.  infinite disables abandonment while
// still consuming one uniform per admitted arrival, so seeds stay comparable
// across patience scales.
struct PatienceSpec {
    double slope = 0.5;
    bool infinite = false;
};

enum class queue_control_kind { zero, feedback, explicit_map };

// Scaled control u(vhat) >= 0 driving the arrival intensity via
// lambda = clamp(1 - u(vhat)/sqrt(n), epsilon0, 1).
struct QueueControl {
    queue_control_kind kind = queue_control_kind::zero;
    std::shared_ptr<const ValueFunctionSolution> sol;  // feedback only
    std::function<double(double)> u_map;               // explicit_map only

    static QueueControl zero_control();
    static QueueControl feedback_from_solution(std::shared_ptr<const ValueFunctionSolution> sol);
    static QueueControl explicit_map(std::function<double(double)> u);
};

struct QueueParams {
    long n = 100;            // scaling index
    double x0_hat = 0.0;     // initial scaled state; V(0) = x0_hat / sqrt(n)
    ServiceSpec service;
    PatienceSpec patience;
    QueueControl control;
    double epsilon0 = 0.1;   // arrival-intensity floor, in (0, 1)
    double alpha = 0.5;
    double p = 1.0;
    CostFunction cost;

    void validate() const;
};

// Discounted cost components of one queue path.  Idle costs are exact per
// interval: the offered waiting time is piecewise linear, so every discount
// integral has a closed form.
struct QueueCostSample {
    double control_cost = 0.0;           // int e^{-alpha t} C(u(Vhat(t))) dt, sub-sampled
    double idle_cost = 0.0;              // p sqrt(n) sum (e^{-alpha a} - e^{-alpha b}) / alpha
    double idle_cost_rewritten = 0.0;    // p (alpha int e^{-alpha t} Lhat dt + e^{-alpha T} Lhat(T))
    double lhat_terminal = 0.0;
    double lhat_terminal_sq = 0.0;

    double total() const { return control_cost + idle_cost; }
    double total_rewritten() const { return control_cost + idle_cost_rewritten; }
};

// One accepted arrival candidate (passed the thinning draw).
struct QueueEvent {
    double time = 0.0;
    double v_before = 0.0;  // offered waiting time just before the arrival
    double v_after = 0.0;
    double patience = 0.0;  // drawn patience d (infinity when disabled)
    double jump = 0.0;      // v_j / n when admitted, 0 otherwise
    bool admitted = false;  // joined the workload: v_before < patience
};

struct IdleInterval {
    double begin = 0.0;
    double end = 0.0;
};

struct QueueTrajectory {
    long n = 0;
    double horizon = 0.0;
    std::vector<QueueEvent> events;      // accepted candidates in time order
    std::vector<IdleInterval> idle;      // maximal idle intervals within [0, T]
    double vhat_terminal = 0.0;          // sqrt(n) V(T)
    double lhat_terminal = 0.0;          // sqrt(n) * cumulative idle time
    long candidates = 0;                 // rate-n candidate arrivals generated
    long admitted = 0;
    long abandoned = 0;                  // accepted candidates with d <= V(t-)
    long clamp_events = 0;               // intensity evaluations where the clamp bound
    QueueCostSample cost;
};

// Patience CDF F_n for tests: min(slope y, 1) on y >= 0 (0 when infinite).
double patience_cdf(const PatienceSpec& spec, double y);

// lambda = clamp(1 - u/sqrt(n), epsilon0, 1); clamped reports whether a bound
// was active.
double control_to_intensity(double u, long n, double epsilon0, bool& clamped);

// Discrete-event path of the offered waiting time: rate-n candidate stream
// thinned by lambda(Vhat(t-)); accepted candidates draw patience d and join
// (jump v_j/n) only if V(t-) < d; V drains at slope 1 and idles at 0.
// Per-candidate draw order: inter-arrival, acceptance, patience (if
// accepted), service (if admitted and the service family needs a draw).
QueueTrajectory simulate_queue_path(const QueueParams& params, double horizon,
                                    std::uint64_t seed);

// Monte Carlo over seeds base_seed .. base_seed + n_paths - 1 with the same
// worker/reduction contract as the diffusion estimator.
CostEstimate estimate_queue_cost(const QueueParams& params, double horizon, long n_paths,
                                 std::uint64_t base_seed, int workers = 1,
                                 double tail_rate_bound = 4.0);

}  // namespace dcp

#endif
