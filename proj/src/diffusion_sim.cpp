#include "dcp/diffusion_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "dcp/errors.hpp"
#include "dcp/rng.hpp"

namespace dcp {

namespace {

void validate_for_sim(const DcpParams& params) {
    auto positive = [](double v, const char* name) {
        if (!std::isfinite(v) || !(v > 0.0)) {
            throw parameter_error(std::string(name) + " must be positive and finite");
        }
    };
    // sigma == 0 is the noiseless test mode; everything else as in the solver
    if (!std::isfinite(params.sigma) || params.sigma < 0.0) {
        throw parameter_error("sigma must be nonnegative and finite");
    }
    positive(params.theta, "theta");
    positive(params.alpha, "alpha");
    positive(params.p, "p");
    require_admissible(params.cost);
}

// Policy evaluation precomputed for the inner loop.  The feedback policy is
// tabulated on the solution grid (u and C(u) per node) and interpolated, so a
// path step costs two lerps instead of a conjugate inversion plus C.
struct prepared_policy {
    policy_kind kind = policy_kind::zero;
    double u_const = 0.0;
    double c_const = 0.0;
    std::vector<double> u_tab;
    std::vector<double> c_tab;
    double inv_h = 0.0;
    double x_end = 0.0;
    size_t last = 0;
    double x_clip = 0.0;  // clipping region is x >= x_clip (monotone derivative)

    void eval(double x, double& u, double& cu, long& clips) const {
        if (kind != policy_kind::feedback) {
            u = u_const;
            cu = c_const;
            return;
        }
        if (x >= x_clip) ++clips;
        const double xq = x < x_end ? x : x_end;
        size_t i = static_cast<size_t>(xq * inv_h);
        if (i >= last) i = last - 1;
        const double t = xq * inv_h - static_cast<double>(i);
        u = u_tab[i] + t * (u_tab[i + 1] - u_tab[i]);
        cu = c_tab[i] + t * (c_tab[i + 1] - c_tab[i]);
    }
};

prepared_policy prepare(const DcpParams& params, const ControlPolicy& policy) {
    prepared_policy pp;
    pp.kind = policy.kind;
    switch (policy.kind) {
        case policy_kind::zero:
            pp.u_const = 0.0;
            pp.c_const = params.cost.cost_at_zero;
            return pp;
        case policy_kind::constant:
            if (!std::isfinite(policy.constant_u) || policy.constant_u < 0.0) {
                throw parameter_error("constant control must be nonnegative and finite");
            }
            pp.u_const = policy.constant_u;
            pp.c_const = params.cost.evaluate(policy.constant_u);
            return pp;
        case policy_kind::feedback:
            break;
    }
    const ValueFunctionSolution* sol = policy.sol.get();
    if (!sol || sol->grid.size() < 2) {
        throw parameter_error("feedback policy requires a solved value function");
    }
    const size_t n = sol->grid.size();
    pp.u_tab.resize(n);
    pp.c_tab.resize(n);
    for (size_t i = 0; i < n; ++i) {
        pp.u_tab[i] = evaluate_policy(*sol, sol->grid[i]);
        pp.c_tab[i] = params.cost.evaluate(pp.u_tab[i]);
    }
    pp.inv_h = 1.0 / sol->h;
    pp.x_end = sol->grid.back();
    pp.last = n - 1;
    pp.x_clip = std::numeric_limits<double>::infinity();
    if (!sol->zero_control) {
        const double wtol = sol->w_zero_tolerance;
        for (size_t i = 0; i < n; ++i) {
            if (sol->qp[i] >= -wtol) {
                // interpolate the crossing of qp = -wtol inside [i-1, i]
                if (i == 0) {
                    pp.x_clip = sol->grid[0];
                } else {
                    const double a = sol->qp[i - 1];
                    const double b = sol->qp[i];
                    const double t = (-wtol - a) / (b - a);
                    pp.x_clip = sol->grid[i - 1] + t * sol->h;
                }
                break;
            }
        }
    }
    return pp;
}

struct kahan {
    double s = 0.0;
    double c = 0.0;
    void add(double v) {
        const double y = v - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
};

PathRealization run_path(const DcpParams& params, const prepared_policy& pp, double x0, double dt,
                         double horizon, std::uint64_t seed, std::vector<double>* trace_x,
                         std::vector<double>* trace_dl) {
    const long n_steps = std::lround(horizon / dt);
    const double ea = std::exp(-params.alpha * dt);
    const double noise_scale = params.sigma * std::sqrt(dt);
    const double decay = 1.0 - params.theta * dt;
    rng gen(seed);

    double x = x0;
    double disc = 1.0;
    double l = 0.0;
    double ctrl_sum = 0.0;
    kahan idle_sum;       // sum_k disc_k dL_k
    kahan idle_rw_sum;    // sum_k (disc_k - disc_{k+1}) L_{k+1}, telescopes to the direct form
    double max_x = x0;
    long clips = 0;
    long refl = 0;
    if (trace_x) {
        trace_x->reserve(static_cast<size_t>(n_steps));
        trace_dl->reserve(static_cast<size_t>(n_steps));
    }
    for (long k = 0; k < n_steps; ++k) {
        double u = 0.0;
        double cu = 0.0;
        pp.eval(x, u, cu, clips);
        ctrl_sum += cu * disc;
        const double prop = x * decay - u * dt + noise_scale * gen.normal();
        if (!std::isfinite(prop)) {
            throw simulation_error("state became non-finite at step " + std::to_string(k));
        }
        double dl = 0.0;
        if (prop < 0.0) {
            dl = -prop;
            x = 0.0;
            l += dl;
            idle_sum.add(disc * dl);
            ++refl;
        } else {
            x = prop;
            if (x > max_x) max_x = x;
        }
        const double disc_next = disc * ea;
        idle_rw_sum.add((disc - disc_next) * l);
        if (trace_x) {
            trace_x->push_back(x);
            trace_dl->push_back(dl);
        }
        disc = disc_next;
    }

    PathRealization out;
    out.seed = seed;
    out.dt = dt;
    out.horizon = horizon;
    out.n_steps = n_steps;
    out.control_cost = ctrl_sum * (1.0 - ea) / params.alpha;
    out.idle_cost = params.p * idle_sum.s;
    out.idle_cost_rewritten = params.p * (idle_rw_sum.s + disc * l);
    out.local_time = l;
    out.terminal_state = x;
    out.max_state = max_x;
    out.clip_events = clips;
    out.reflect_steps = refl;
    return out;
}

void validate_path_args(double x0, double dt, double horizon) {
    if (!std::isfinite(x0) || x0 < 0.0) throw parameter_error("x0 must be nonnegative and finite");
    if (!std::isfinite(dt) || !(dt > 0.0)) throw parameter_error("dt must be positive and finite");
    if (!std::isfinite(horizon) || !(horizon > 0.0)) {
        throw parameter_error("horizon must be positive and finite");
    }
    if (std::lround(horizon / dt) < 1) throw parameter_error("horizon must cover at least one step");
}

std::string format_u(double u) {
    std::ostringstream os;
    os << u;
    return os.str();
}

}  // namespace

ControlPolicy ControlPolicy::zero_control() {
    ControlPolicy p;
    p.kind = policy_kind::zero;
    return p;
}

ControlPolicy ControlPolicy::constant_control(double u) {
    ControlPolicy p;
    p.kind = policy_kind::constant;
    p.constant_u = u;
    return p;
}

ControlPolicy ControlPolicy::feedback_from_solution(
    std::shared_ptr<const ValueFunctionSolution> sol) {
    ControlPolicy p;
    p.kind = policy_kind::feedback;
    p.sol = std::move(sol);
    return p;
}

PathRealization simulate_reflected_path(const DcpParams& params, const ControlPolicy& policy,
                                        double x0, double dt, double horizon, std::uint64_t seed) {
    validate_for_sim(params);
    validate_path_args(x0, dt, horizon);
    const prepared_policy pp = prepare(params, policy);
    return run_path(params, pp, x0, dt, horizon, seed, nullptr, nullptr);
}

ReflectedPathTrace simulate_reflected_path_trace(const DcpParams& params,
                                                 const ControlPolicy& policy, double x0, double dt,
                                                 double horizon, std::uint64_t seed) {
    validate_for_sim(params);
    validate_path_args(x0, dt, horizon);
    const prepared_policy pp = prepare(params, policy);
    ReflectedPathTrace trace;
    trace.summary = run_path(params, pp, x0, dt, horizon, seed, &trace.x, &trace.dl);
    return trace;
}

CostEstimate estimate_cost(const DcpParams& params, const ControlPolicy& policy, double x0,
                           double dt, double horizon, long n_paths, std::uint64_t base_seed,
                           int workers, double tail_rate_bound) {
    validate_for_sim(params);
    validate_path_args(x0, dt, horizon);
    if (n_paths < 2) throw parameter_error("n_paths must be at least 2");
    if (workers < 1) throw parameter_error("workers must be at least 1");
    const prepared_policy pp = prepare(params, policy);

    const int n_workers = static_cast<int>(std::min<long>(workers, n_paths));
    std::vector<path_accumulator> acc(static_cast<size_t>(n_workers));
    std::vector<std::string> errors(static_cast<size_t>(n_workers));
    std::vector<long> error_counts(static_cast<size_t>(n_workers), 0);

    auto run_block = [&](int wi, long begin, long end) {
        path_accumulator local;
        for (long i = begin; i < end; ++i) {
            try {
                const PathRealization pr = run_path(params, pp, x0, dt, horizon,
                                                    base_seed + static_cast<std::uint64_t>(i),
                                                    nullptr, nullptr);
                local.add(pr.total(), pr.total_rewritten(), pr.control_cost, pr.idle_cost,
                          pr.local_time, static_cast<double>(pr.clip_events),
                          static_cast<double>(pr.n_steps));
            } catch (const std::exception& e) {
                if (error_counts[static_cast<size_t>(wi)]++ == 0) {
                    errors[static_cast<size_t>(wi)] = e.what();
                }
            }
        }
        acc[static_cast<size_t>(wi)] = local;
    };

    if (n_workers == 1) {
        run_block(0, 0, n_paths);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(n_workers));
        const long base = n_paths / n_workers;
        const long rem = n_paths % n_workers;
        long begin = 0;
        for (int wi = 0; wi < n_workers; ++wi) {
            const long len = base + (wi < rem ? 1 : 0);
            threads.emplace_back(run_block, wi, begin, begin + len);
            begin += len;
        }
        for (auto& t : threads) t.join();
    }

    long total_errors = 0;
    std::string first_error;
    path_accumulator merged;
    for (int wi = 0; wi < n_workers; ++wi) {
        merged.merge(acc[static_cast<size_t>(wi)]);
        total_errors += error_counts[static_cast<size_t>(wi)];
        if (first_error.empty()) first_error = errors[static_cast<size_t>(wi)];
    }
    if (total_errors > 0) {
        throw simulation_error(std::to_string(total_errors) +
                               " paths aborted; first error: " + first_error);
    }
    return finalize_estimate(merged, params.alpha, horizon, params.cost.cost_at_zero, params.p,
                             tail_rate_bound);
}

DominanceReport dominance_report(const DcpParams& params, const ValueFunctionSolution& sol,
                                 double x0, const std::vector<ControlPolicy>& policies,
                                 const McConfig& mc) {
    validate_for_sim(params);
    long feedback_count = 0;
    long alternative_count = 0;
    for (const auto& p : policies) {
        if (p.kind == policy_kind::feedback) {
            ++feedback_count;
        } else {
            ++alternative_count;
        }
    }
    if (feedback_count < 1 || alternative_count < 2) {
        throw parameter_error("dominance report needs the feedback policy and >= 2 alternatives");
    }
    if (sol.grid.size() < 2) throw parameter_error("solution has no usable grid");

    // Q(x0) by interpolation on the solution grid
    const double xq = std::min(std::max(x0, 0.0), sol.grid.back());
    size_t i = static_cast<size_t>(std::min(xq / sol.h, static_cast<double>(sol.grid.size() - 2)));
    if (i > sol.grid.size() - 2) i = sol.grid.size() - 2;
    const double t = std::clamp((xq - sol.grid[i]) / sol.h, 0.0, 1.0);
    const double q_x0 = sol.q[i] + t * (sol.q[i + 1] - sol.q[i]);

    DominanceReport report;
    report.q_x0 = q_x0;
    report.all_pass = true;
    for (const auto& policy : policies) {
        PolicyReport row;
        switch (policy.kind) {
            case policy_kind::zero: row.label = "zero"; break;
            case policy_kind::constant:
                row.label = "constant(" + format_u(policy.constant_u) + ")";
                break;
            case policy_kind::feedback: row.label = "feedback"; break;
        }
        row.is_feedback = policy.kind == policy_kind::feedback;
        row.estimate = estimate_cost(params, policy, x0, mc.dt, mc.horizon, mc.n_paths,
                                     mc.base_seed, mc.workers, mc.tail_rate_bound);
        std::ostringstream check;
        if (row.is_feedback) {
            const double err = std::abs(row.estimate.mean - q_x0);
            const double budget = 3.0 * row.estimate.standard_error + mc.budget;
            row.pass = err <= budget;
            check << "|mean - Q(x0)| = " << err << " <= 3 SE + budget = " << budget;
        } else {
            const double lhs = row.estimate.mean + 3.0 * row.estimate.standard_error;
            const double rhs = q_x0 - mc.budget;
            row.pass = lhs >= rhs;
            check << "mean + 3 SE = " << lhs << " >= Q(x0) - budget = " << rhs;
        }
        row.check = check.str();
        report.all_pass = report.all_pass && row.pass;
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace dcp
