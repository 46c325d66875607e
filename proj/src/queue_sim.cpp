#include "dcp/queue_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <thread>

#include "dcp/errors.hpp"
#include "dcp/rng.hpp"

namespace dcp {

namespace {

// Control evaluation precomputed per run: the feedback policy is tabulated on
// the solution grid (u and C(u)) and interpolated in vhat.
struct prepared_qc {
    queue_control_kind kind = queue_control_kind::zero;
    const std::function<double(double)>* u_map = nullptr;
    const CostFunction* cost = nullptr;
    std::vector<double> u_tab;
    std::vector<double> c_tab;
    double inv_h = 0.0;
    double x_end = 0.0;
    size_t last = 0;

    double lerp(const std::vector<double>& tab, double vhat) const {
        const double xq = vhat < x_end ? vhat : x_end;
        size_t i = static_cast<size_t>(xq * inv_h);
        if (i >= last) i = last - 1;
        const double t = xq * inv_h - static_cast<double>(i);
        return tab[i] + t * (tab[i + 1] - tab[i]);
    }
    double u_at(double vhat) const {
        switch (kind) {
            case queue_control_kind::zero: return 0.0;
            case queue_control_kind::explicit_map: return (*u_map)(vhat);
            case queue_control_kind::feedback: return lerp(u_tab, vhat);
        }
        return 0.0;
    }
    double c_at(double vhat) const {
        switch (kind) {
            case queue_control_kind::zero: return cost->cost_at_zero;
            case queue_control_kind::explicit_map: return cost->evaluate((*u_map)(vhat));
            case queue_control_kind::feedback: return lerp(c_tab, vhat);
        }
        return 0.0;
    }
};

prepared_qc prepare(const QueueParams& params) {
    prepared_qc qc;
    qc.kind = params.control.kind;
    qc.cost = &params.cost;
    qc.u_map = &params.control.u_map;
    if (qc.kind != queue_control_kind::feedback) return qc;
    const ValueFunctionSolution& sol = *params.control.sol;
    const size_t n = sol.grid.size();
    qc.u_tab.resize(n);
    qc.c_tab.resize(n);
    for (size_t i = 0; i < n; ++i) {
        qc.u_tab[i] = evaluate_policy(sol, sol.grid[i]);
        qc.c_tab[i] = params.cost.evaluate(qc.u_tab[i]);
    }
    qc.inv_h = 1.0 / sol.h;
    qc.x_end = sol.grid.back();
    qc.last = n - 1;
    return qc;
}

struct qpath_result {
    QueueCostSample cost;
    double vhat_terminal = 0.0;
    double lhat_terminal = 0.0;
    long candidates = 0;
    long admitted = 0;
    long abandoned = 0;
    long clamp_events = 0;
};

// One discrete-event path.  The offered waiting time V is kept unscaled; all
// discount integrals over drain/idle segments use closed forms, and the
// control integrand is sub-sampled at spacing <= 1/(10 sqrt(n)) along drains.
qpath_result run_queue_path(const QueueParams& params, const prepared_qc& qc, double horizon,
                            std::uint64_t seed, QueueTrajectory* rec) {
    const double sqrt_n = std::sqrt(static_cast<double>(params.n));
    const double alpha = params.alpha;
    const double rate = static_cast<double>(params.n);
    const bool use_gamma = params.service.family == service_family::gamma;
    rng gen(seed);
    std::gamma_distribution<double> gamma_dist;
    if (use_gamma) {
        gamma_dist = std::gamma_distribution<double>(1.0 / params.service.variance,
                                                     params.service.variance);
    }

    double t = 0.0;
    double v = params.x0_hat / sqrt_n;
    double disc = 1.0;       // e^{-alpha t}
    double lhat = 0.0;       // sqrt(n) * cumulative idle time
    double flat_disc = 1.0;  // discount at the last idle end (lhat flat since)
    double ctrl = 0.0;
    double idle_weight = 0.0;  // sum (e^{-alpha a} - e^{-alpha b}) / alpha over idle intervals
    double rw = 0.0;           // alpha int e^{-alpha s} lhat(s) ds, accumulated exactly
    qpath_result out;

    const double sub_spacing = 1.0 / (10.0 * sqrt_n);
    auto drain_control = [&](double v_start, double disc_start, double len) {
        long m = static_cast<long>(std::ceil(len / sub_spacing));
        if (m < 1) m = 1;
        const double dsub = len / static_cast<double>(m);
        const double esub = std::exp(-alpha * dsub);
        const double w = (1.0 - esub) / alpha;
        double dj = disc_start;
        for (long j = 0; j < m; ++j) {
            const double vhat_mid =
                std::max(0.0, sqrt_n * (v_start - (static_cast<double>(j) + 0.5) * dsub));
            ctrl += qc.c_at(vhat_mid) * dj * w;
            dj *= esub;
        }
    };
    // advance state over [t, t_end): drain at slope 1, then idle at 0
    auto advance = [&](double t_end, double disc_end) {
        const double gap = t_end - t;
        if (gap > 0.0) {
            const double drain = std::min(v, gap);
            if (drain > 0.0) drain_control(v, disc, drain);
            if (drain < gap) {
                const double idle_begin = t + drain;
                const double disc_c = drain > 0.0 ? disc * std::exp(-alpha * drain) : disc;
                ctrl += qc.c_at(0.0) * (disc_c - disc_end) / alpha;
                idle_weight += (disc_c - disc_end) / alpha;
                rw += lhat * (flat_disc - disc_end) +
                      sqrt_n * ((disc_c - disc_end) / alpha - (t_end - idle_begin) * disc_end);
                lhat += sqrt_n * (t_end - idle_begin);
                flat_disc = disc_end;
                if (rec) {
                    if (!rec->idle.empty() && rec->idle.back().end == idle_begin) {
                        rec->idle.back().end = t_end;
                    } else {
                        rec->idle.push_back({idle_begin, t_end});
                    }
                }
            }
            v = std::max(0.0, v - gap);
        }
        t = t_end;
        disc = disc_end;
    };

    while (true) {
        const double gap = gen.exponential(rate);
        const double t_next = t + gap;
        if (t_next >= horizon) {
            advance(horizon, disc * std::exp(-alpha * (horizon - t)));
            break;
        }
        ++out.candidates;
        advance(t_next, disc * std::exp(-alpha * gap));
        const double v_before = v;
        bool clamped = false;
        const double lambda =
            control_to_intensity(qc.u_at(sqrt_n * v_before), params.n, params.epsilon0, clamped);
        if (clamped) ++out.clamp_events;
        if (gen.uniform() < lambda) {
            const double u_pat = gen.uniform();
            const double d = params.patience.infinite ? std::numeric_limits<double>::infinity()
                                                      : u_pat / params.patience.slope;
            QueueEvent ev;
            ev.time = t_next;
            ev.v_before = v_before;
            ev.patience = d;
            if (v_before < d) {
                const double vj = use_gamma ? gamma_dist(gen) : 1.0;
                ev.jump = vj / static_cast<double>(params.n);
                v = v_before + ev.jump;
                ev.admitted = true;
                ++out.admitted;
            } else {
                ++out.abandoned;
            }
            ev.v_after = v;
            if (rec) rec->events.push_back(ev);
        }
    }

    rw += lhat * (flat_disc - disc);  // flush the trailing flat span to T
    out.cost.control_cost = ctrl;
    out.cost.idle_cost = params.p * sqrt_n * idle_weight;
    out.cost.idle_cost_rewritten = params.p * (rw + disc * lhat);
    out.cost.lhat_terminal = lhat;
    out.cost.lhat_terminal_sq = lhat * lhat;
    out.vhat_terminal = sqrt_n * v;
    out.lhat_terminal = lhat;
    return out;
}

void validate_horizon(double horizon) {
    if (!std::isfinite(horizon) || !(horizon > 0.0)) {
        throw parameter_error("horizon must be positive and finite");
    }
}

}  // namespace

QueueControl QueueControl::zero_control() {
    QueueControl c;
    c.kind = queue_control_kind::zero;
    return c;
}

QueueControl QueueControl::feedback_from_solution(
    std::shared_ptr<const ValueFunctionSolution> sol) {
    QueueControl c;
    c.kind = queue_control_kind::feedback;
    c.sol = std::move(sol);
    return c;
}

QueueControl QueueControl::explicit_map(std::function<double(double)> u) {
    QueueControl c;
    c.kind = queue_control_kind::explicit_map;
    c.u_map = std::move(u);
    return c;
}

void QueueParams::validate() const {
    if (n < 1) throw parameter_error("n must be a positive integer");
    if (!std::isfinite(x0_hat) || x0_hat < 0.0) {
        throw parameter_error("x0_hat must be nonnegative and finite");
    }
    if (!(epsilon0 > 0.0) || !(epsilon0 < 1.0)) {
        throw parameter_error("epsilon0 must lie in (0, 1)");
    }
    if (!std::isfinite(alpha) || !(alpha > 0.0)) {
        throw parameter_error("alpha must be positive and finite");
    }
    if (!std::isfinite(p) || !(p > 0.0)) throw parameter_error("p must be positive and finite");
    if (!std::isfinite(patience.slope) || !(patience.slope > 0.0)) {
        throw parameter_error("patience slope must be positive and finite");
    }
    if (service.family == service_family::deterministic) {
        if (service.variance != 0.0) {
            throw parameter_error("deterministic service requires variance 0");
        }
    } else {
        if (!std::isfinite(service.variance) || !(service.variance > 0.0)) {
            throw parameter_error("gamma service requires positive variance");
        }
    }
    require_admissible(cost);
    if (control.kind == queue_control_kind::feedback) {
        if (!control.sol || control.sol->grid.size() < 2) {
            throw parameter_error("feedback control requires a solved value function");
        }
    } else if (control.kind == queue_control_kind::explicit_map) {
        if (!control.u_map) throw parameter_error("explicit control requires a u map");
    }
}

double patience_cdf(const PatienceSpec& spec, double y) {
    if (spec.infinite || y <= 0.0) return 0.0;
    return std::min(spec.slope * y, 1.0);
}

double control_to_intensity(double u, long n, double epsilon0, bool& clamped) {
    if (!std::isfinite(u) || u < 0.0) {
        throw parameter_error("control value must be nonnegative and finite");
    }
    if (n < 1) throw parameter_error("n must be a positive integer");
    if (!(epsilon0 > 0.0) || !(epsilon0 < 1.0)) {
        throw parameter_error("epsilon0 must lie in (0, 1)");
    }
    const double raw = 1.0 - u / std::sqrt(static_cast<double>(n));
    clamped = raw < epsilon0 || raw > 1.0;
    return std::clamp(raw, epsilon0, 1.0);
}

QueueTrajectory simulate_queue_path(const QueueParams& params, double horizon,
                                    std::uint64_t seed) {
    params.validate();
    validate_horizon(horizon);
    const prepared_qc qc = prepare(params);
    QueueTrajectory traj;
    traj.n = params.n;
    traj.horizon = horizon;
    const qpath_result r = run_queue_path(params, qc, horizon, seed, &traj);
    traj.vhat_terminal = r.vhat_terminal;
    traj.lhat_terminal = r.lhat_terminal;
    traj.candidates = r.candidates;
    traj.admitted = r.admitted;
    traj.abandoned = r.abandoned;
    traj.clamp_events = r.clamp_events;
    traj.cost = r.cost;
    return traj;
}

CostEstimate estimate_queue_cost(const QueueParams& params, double horizon, long n_paths,
                                 std::uint64_t base_seed, int workers, double tail_rate_bound) {
    params.validate();
    validate_horizon(horizon);
    if (n_paths < 2) throw parameter_error("n_paths must be at least 2");
    if (workers < 1) throw parameter_error("workers must be at least 1");
    const prepared_qc qc = prepare(params);

    const int n_workers = static_cast<int>(std::min<long>(workers, n_paths));
    std::vector<path_accumulator> acc(static_cast<size_t>(n_workers));

    auto run_block = [&](int wi, long begin, long end) {
        path_accumulator local;
        for (long i = begin; i < end; ++i) {
            const qpath_result r = run_queue_path(params, qc, horizon,
                                                  base_seed + static_cast<std::uint64_t>(i),
                                                  nullptr);
            local.add(r.cost.total(), r.cost.total_rewritten(), r.cost.control_cost,
                      r.cost.idle_cost, r.lhat_terminal, static_cast<double>(r.clamp_events),
                      static_cast<double>(r.candidates));
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
        for (auto& th : threads) th.join();
    }

    path_accumulator merged;
    for (int wi = 0; wi < n_workers; ++wi) merged.merge(acc[static_cast<size_t>(wi)]);
    return finalize_estimate(merged, params.alpha, horizon, params.cost.cost_at_zero, params.p,
                             tail_rate_bound);
}

}  // namespace dcp
