#include "dcp/hjb_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "dcp/errors.hpp"

namespace dcp {

namespace {

// Right-hand side evaluator for the first-order system in (W, I):
//   W' = (2/sigma^2) (F(W) + theta x W + alpha (I + K)),  I' = W.
// zero_f drops the F term (zero-control mode); extended switches between the
// linearly extended functional and the raw conjugate.
struct rhs_eval {
    const CostFunction* cost = nullptr;
    bool zero_f = false;
    bool extended = true;
    double delta = 1e-8;
    double f_junction = 0.0;
    double fp_junction = 0.0;
    double two_over_sigma2 = 0.0;
    double theta = 0.0;
    double alpha = 0.0;

    double f_of(double y) const {
        if (zero_f) return 0.0;
        if (!extended || y <= -delta) return legendre_eval(*cost, y);
        return f_junction + fp_junction * (y + delta);
    }
    double g_of(double x, double w, double integral, double k) const {
        return two_over_sigma2 * (f_of(w) + theta * x * w + alpha * (integral + k));
    }
};

rhs_eval make_rhs(const DcpParams& params, const ShootingConfig& cfg, bool zero_f, bool extended) {
    rhs_eval f;
    f.cost = &params.cost;
    f.zero_f = zero_f;
    f.extended = extended;
    f.delta = cfg.delta;
    if (!zero_f) {
        f.f_junction = legendre_eval(params.cost, -cfg.delta);
        f.fp_junction = legendre_derivative(params.cost, -cfg.delta);
    }
    f.two_over_sigma2 = 2.0 / (params.sigma * params.sigma);
    f.theta = params.theta;
    f.alpha = params.alpha;
    return f;
}

enum class seg_class { lm, hz, end, bad };

struct march_out {
    seg_class cls = seg_class::end;
    long i_event = 0;  // node where the event fired; n_end when eventless
    double x_cross = 0.0;
    double slope_cross = 0.0;
    double w_last = 0.0;
    double g_last = 0.0;
};

// Heun march of (W, I) from node i0 to n_end with trapezoid running integral.
// Events on committed nodes: hz once W >= 0 (or, without the extension, when a
// predictor stage leaves the conjugate's domain), lm once the RHS turns
// nonpositive while W < -wtol.  rec_w / rec_g, when given, are filled at every
// committed node through the event node, so bracketing marches stay comparable
// sample by sample.
march_out march_w(const rhs_eval& f, double k, long i0, double w0, double integral0, long n_end,
                  double h, double wtol, double* rec_w, double* rec_g) {
    march_out out;
    double x = static_cast<double>(i0) * h;
    double w = w0;
    double integral = integral0;
    if (w >= 0.0) {
        if (rec_w) rec_w[i0] = w;
        if (rec_g) rec_g[i0] = 0.0;
        out.cls = seg_class::hz;
        out.i_event = i0;
        out.x_cross = x;
        out.w_last = w;
        return out;
    }
    double g = f.g_of(x, w, integral, k);
    if (rec_w) rec_w[i0] = w;
    if (rec_g) rec_g[i0] = g;
    if (g <= 0.0 && w < -wtol) {
        out.cls = seg_class::lm;
        out.i_event = i0;
        out.w_last = w;
        out.g_last = g;
        return out;
    }
    for (long i = i0; i < n_end; ++i) {
        const double w1 = w + h * g;
        if (!f.zero_f && !f.extended && w1 > conjugate_zero_snap) {
            // stage left the conjugate's domain: reclassify as an axis crossing
            out.cls = seg_class::hz;
            out.i_event = i;
            out.x_cross = x + h * (w / (w - w1));
            out.slope_cross = g;
            out.w_last = w;
            out.g_last = g;
            return out;
        }
        const double x1 = x + h;
        const double int1 = integral + 0.5 * h * (w + w1);
        const double g2 = f.g_of(x1, w1, int1, k);
        const double w_new = w + 0.5 * h * (g + g2);
        const double integral_new = integral + 0.5 * h * (w + w_new);
        if (!std::isfinite(w_new)) {
            out.cls = seg_class::bad;
            out.i_event = i;
            out.w_last = w;
            out.g_last = g;
            return out;
        }
        if (w_new >= 0.0) {
            const double slope = (w_new - w) / h;
            if (rec_w) rec_w[i + 1] = w_new;
            if (rec_g) rec_g[i + 1] = slope;
            out.cls = seg_class::hz;
            out.i_event = i + 1;
            out.x_cross = x + h * (w / (w - w_new));
            out.slope_cross = slope;
            out.w_last = w_new;
            out.g_last = slope;
            return out;
        }
        const double g_new = f.g_of(x1, w_new, integral_new, k);
        if (rec_w) rec_w[i + 1] = w_new;
        if (rec_g) rec_g[i + 1] = g_new;
        if (g_new <= 0.0 && w_new < -wtol) {
            out.cls = seg_class::lm;
            out.i_event = i + 1;
            out.w_last = w_new;
            out.g_last = g_new;
            return out;
        }
        w = w_new;
        integral = integral_new;
        g = g_new;
        x = x1;
    }
    out.cls = seg_class::end;
    out.i_event = n_end;
    out.w_last = w;
    out.g_last = g;
    return out;
}

struct assembly {
    double r_star = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double k = 0.0;
    std::vector<double> w;    // certified samples, nodes 0..n
    std::vector<double> cum;  // trapezoid cumulative of w
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

// Locates the critical r by bracket doubling plus bisection, then assembles
// the critical trajectory piecewise.  Forward shooting alone loses the
// decaying branch to the exp(theta x^2 / sigma^2) growing mode, so the grid is
// rebuilt in certified segments: at each restart the restart value is bisected
// until the bracket collapses to machine resolution, and samples are accepted
// only while the two bracketing trajectories (which enclose the critical one)
// agree within join_tol.  The march continues past x_max by a margin chosen so
// the growing mode still separates the event classes beyond the returned
// domain; only [0, x_max] is returned.
assembly assemble_critical(const DcpParams& params, const ShootingConfig& cfg, const rhs_eval& f,
                           double slope0, double f_at_start) {
    const double sigma2 = params.sigma * params.sigma;
    const double h = cfg.h;
    const long n = std::lround(cfg.x_max / h);
    const double margin =
        std::max(3.0, 25.0 * sigma2 / (2.0 * params.theta * std::max(cfg.x_max, 1.0)));
    const long n_r = n + std::lround(margin / h);
    const double w_start = -slope0;
    const double wtol = cfg.w_zero_tolerance;

    auto k_of = [&](double r) { return (0.5 * sigma2 * r - f_at_start) / params.alpha; };
    auto classify_r = [&](double r) {
        return march_w(f, k_of(r), 0, w_start, 0.0, n_r, h, wtol, nullptr, nullptr).cls;
    };

    // stage 1: bracket r between a trajectory with a local max and one that
    // crosses the axis, then bisect the bracket down to r_tolerance
    double lo = 0.0;
    double hi = 1.0;
    if (classify_r(1.0) != seg_class::hz) {
        lo = 1.0;
        hi = 2.0;
        int doublings = 0;
        while (classify_r(hi) != seg_class::hz) {
            lo = hi;
            hi *= 2.0;
            if (++doublings > 20) {
                throw solver_error("no crossing trajectory found while doubling the slope bracket; "
                                   "last classes stayed below the axis up to r = " +
                                   fmt(lo));
            }
        }
    }
    int iters = 0;
    while (hi - lo >= cfg.r_tolerance) {
        if (++iters > cfg.max_bisection_iters) {
            throw solver_error("slope bisection exceeded max_bisection_iters with bracket [" +
                               fmt(lo) + ", " + fmt(hi) + "]");
        }
        const double mid = 0.5 * (lo + hi);
        if (classify_r(mid) == seg_class::hz) {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    // refine a working copy of the bracket to adjacent doubles: the assembly
    // constant k must match the boundary value at machine resolution, or the
    // first restart bisection re-centers on a start value a few 1e-10 away
    // from -p and leaves a slope kink (hence a residual spike) at the second
    // node.  The reported bracket keeps the configured tolerance.
    double lo_w = lo;
    double hi_w = hi;
    for (int it = 0; it < cfg.max_bisection_iters; ++it) {
        const double mid = 0.5 * (lo_w + hi_w);
        if (mid <= lo_w || mid >= hi_w) break;
        if (classify_r(mid) == seg_class::hz) {
            hi_w = mid;
        } else {
            lo_w = mid;
        }
    }

    assembly out;
    out.r_star = 0.5 * (lo_w + hi_w);
    out.lo = lo;
    out.hi = hi;
    out.k = k_of(out.r_star);

    // stage 2: certified segmented assembly at the fixed constant k
    const double join_tol = 1e-11 * std::max(1.0, slope0);
    std::vector<double> w_mid(static_cast<size_t>(n_r) + 1);
    std::vector<double> w_lo(static_cast<size_t>(n_r) + 1);
    std::vector<double> w_hi(static_cast<size_t>(n_r) + 1);
    out.w.assign(static_cast<size_t>(n) + 1, 0.0);
    out.cum.assign(static_cast<size_t>(n) + 1, 0.0);
    out.w[0] = w_start;

    long accepted = 0;
    int failsafes = 0;
    while (accepted < n) {
        const long i0 = accepted;
        const double w0 = out.w[static_cast<size_t>(i0)];
        const double integral0 = out.cum[static_cast<size_t>(i0)];
        const march_out m_mid =
            march_w(f, out.k, i0, w0, integral0, n_r, h, wtol, w_mid.data(), nullptr);
        if (m_mid.cls == seg_class::end) {
            // eventless through the extended domain: on the decaying branch to
            // machine precision, so the remaining samples are taken as-is
            for (long j = i0 + 1; j <= n; ++j) {
                out.w[static_cast<size_t>(j)] = w_mid[static_cast<size_t>(j)];
                out.cum[static_cast<size_t>(j)] =
                    out.cum[static_cast<size_t>(j - 1)] +
                    0.5 * h * (out.w[static_cast<size_t>(j - 1)] + out.w[static_cast<size_t>(j)]);
            }
            accepted = n;
            break;
        }
        if (m_mid.cls == seg_class::bad) {
            throw solver_error("trajectory overflow during assembly near x = " +
                               fmt(static_cast<double>(m_mid.i_event) * h));
        }

        // bracket the critical restart value around the accepted sample
        double eps = std::max(1e-16, std::abs(w0) * 1e-13);
        double wl = 0.0;
        double wh = 0.0;
        int expansions = 0;
        if (m_mid.cls == seg_class::hz) {
            wh = w0;
            wl = w0 - eps;
            while (march_w(f, out.k, i0, wl, integral0, n_r, h, wtol, nullptr, nullptr).cls ==
                   seg_class::hz) {
                eps *= 2.0;
                wl = w0 - eps;
                if (++expansions > 120) {
                    throw solver_error("restart bracket search failed below the sample at x = " +
                                       fmt(static_cast<double>(i0) * h));
                }
            }
        } else {
            wl = w0;
            wh = std::min(w0 + eps, 0.0);
            while (wh < 0.0 &&
                   march_w(f, out.k, i0, wh, integral0, n_r, h, wtol, nullptr, nullptr).cls !=
                       seg_class::hz) {
                eps *= 2.0;
                wh = std::min(w0 + eps, 0.0);
                if (++expansions > 120) {
                    throw solver_error("restart bracket search failed above the sample at x = " +
                                       fmt(static_cast<double>(i0) * h));
                }
            }
            // wh == 0 classifies as an immediate crossing, so the bracket is valid
        }
        for (int it = 0; it < cfg.max_bisection_iters; ++it) {
            const double wm = 0.5 * (wl + wh);
            if (wm <= wl || wm >= wh) break;  // bracket collapsed to adjacent doubles
            if (march_w(f, out.k, i0, wm, integral0, n_r, h, wtol, nullptr, nullptr).cls ==
                seg_class::hz) {
                wh = wm;
            } else {
                wl = wm;
            }
        }
        const march_out m_lo =
            march_w(f, out.k, i0, wl, integral0, n_r, h, wtol, w_lo.data(), nullptr);
        const march_out m_hi =
            march_w(f, out.k, i0, wh, integral0, n_r, h, wtol, w_hi.data(), nullptr);

        // accept the prefix where the bracketing trajectories still agree;
        // they enclose the critical one, so agreement certifies the samples
        const long scan_max = std::min(std::min(m_lo.i_event, m_hi.i_event), n);
        long new_acc = i0;
        for (long j = i0 + 1; j <= scan_max; ++j) {
            if (std::abs(w_hi[static_cast<size_t>(j)] - w_lo[static_cast<size_t>(j)]) > join_tol) {
                break;
            }
            out.w[static_cast<size_t>(j)] =
                0.5 * (w_lo[static_cast<size_t>(j)] + w_hi[static_cast<size_t>(j)]);
            out.cum[static_cast<size_t>(j)] =
                out.cum[static_cast<size_t>(j - 1)] +
                0.5 * h * (out.w[static_cast<size_t>(j - 1)] + out.w[static_cast<size_t>(j)]);
            new_acc = j;
        }
        if (new_acc == i0) {
            // single-node failsafe so every pass makes progress
            const long j = i0 + 1;
            double v = 0.0;
            if (j <= std::min(m_lo.i_event, m_hi.i_event) &&
                std::isfinite(w_lo[static_cast<size_t>(j)]) &&
                std::isfinite(w_hi[static_cast<size_t>(j)])) {
                v = 0.5 * (w_lo[static_cast<size_t>(j)] + w_hi[static_cast<size_t>(j)]);
            } else if (j <= m_mid.i_event && std::isfinite(w_mid[static_cast<size_t>(j)])) {
                v = w_mid[static_cast<size_t>(j)];
            } else {
                throw solver_error("assembly stalled at x = " + fmt(static_cast<double>(i0) * h));
            }
            out.w[static_cast<size_t>(j)] = v;
            out.cum[static_cast<size_t>(j)] =
                out.cum[static_cast<size_t>(j - 1)] +
                0.5 * h * (out.w[static_cast<size_t>(j - 1)] + v);
            new_acc = j;
            if (++failsafes > 10000) {
                throw solver_error("assembly degenerated to stepwise progress near x = " +
                                   fmt(static_cast<double>(i0) * h));
            }
        }
        accepted = new_acc;
    }
    return out;
}

void verify_solution(const ValueFunctionSolution& sol, const rhs_eval& f, double sigma2,
                     double slope0, double res_tol) {
    const size_t n = sol.grid.size();
    const double slack = 1e-12 * std::max(1.0, slope0);
    if (sol.qp.front() != -slope0) {
        throw solver_error("solution invariant violated: boundary slope is " + fmt(sol.qp.front()) +
                           ", expected " + fmt(-slope0));
    }
    for (size_t i = 0; i < n; ++i) {
        if (!(sol.qp[i] < 0.0)) {
            throw solver_error("solution invariant violated: derivative reaches zero at x = " +
                               fmt(sol.grid[i]));
        }
        if (sol.qp[i] < -slope0 - slack) {
            throw solver_error("solution invariant violated: derivative below the boundary value "
                               "at x = " +
                               fmt(sol.grid[i]));
        }
        if (!(sol.q[i] > 0.0)) {
            throw solver_error("solution invariant violated: value not positive at x = " +
                               fmt(sol.grid[i]));
        }
        if (i + 1 < n) {
            if (sol.qp[i + 1] < sol.qp[i] - slack) {
                throw solver_error("solution invariant violated: derivative not nondecreasing "
                                   "at x = " +
                                   fmt(sol.grid[i + 1]));
            }
            if (!(sol.q[i + 1] < sol.q[i])) {
                throw solver_error("solution invariant violated: value not strictly decreasing "
                                   "at x = " +
                                   fmt(sol.grid[i + 1]));
            }
        }
    }
    const double h = sol.h;
    for (size_t i = 1; i + 1 < n; ++i) {
        const double lhs = 0.5 * sigma2 * (sol.qp[i + 1] - sol.qp[i - 1]) / (2.0 * h);
        const double rhs =
            f.f_of(sol.qp[i]) + f.theta * sol.grid[i] * sol.qp[i] + f.alpha * sol.q[i];
        if (std::abs(lhs - rhs) > res_tol) {
            throw solver_error("solution invariant violated: stationarity residual " +
                               fmt(std::abs(lhs - rhs)) + " at x = " + fmt(sol.grid[i]));
        }
    }
}

ValueFunctionSolution build_solution(const DcpParams& params, const ShootingConfig& cfg,
                                     bool zero_control) {
    params.validate();
    cfg.validate(params);
    const rhs_eval f = make_rhs(params, cfg, zero_control, true);
    const double slope0 = zero_control ? 1.0 : params.p;
    const double f_at_start = zero_control ? 0.0 : legendre_eval(params.cost, -params.p);
    const assembly a = assemble_critical(params, cfg, f, slope0, f_at_start);

    ValueFunctionSolution sol;
    sol.r_star = a.r_star;
    sol.bracket_lo = a.lo;
    sol.bracket_hi = a.hi;
    sol.k_r_star = a.k;
    sol.h = cfg.h;
    sol.w_zero_tolerance = cfg.w_zero_tolerance;
    sol.delta = cfg.delta;
    sol.cost = params.cost;
    sol.zero_control = zero_control;
    const size_t n = a.w.size();
    sol.grid.resize(n);
    sol.q.resize(n);
    sol.qp = a.w;
    for (size_t i = 0; i < n; ++i) {
        sol.grid[i] = static_cast<double>(i) * cfg.h;
        sol.q[i] = a.k + a.cum[i];
    }
    sol.x_max = sol.grid.back();

    const double sigma2 = params.sigma * params.sigma;
    const double hr = cfg.h / 1e-3;
    const double res_tol = 1e-6 * std::max(1.0, hr * hr);
    verify_solution(sol, f, sigma2, slope0, res_tol);
    return sol;
}

}  // namespace

void DcpParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!std::isfinite(v) || !(v > 0.0)) {
            throw parameter_error(std::string(name) + " must be positive and finite");
        }
    };
    positive(sigma, "sigma");
    positive(theta, "theta");
    positive(alpha, "alpha");
    positive(p, "p");
    require_admissible(cost);
}

void ShootingConfig::validate(const DcpParams& params) const {
    if (!std::isfinite(h) || !(h > 0.0)) throw parameter_error("h must be positive and finite");
    if (!std::isfinite(x_max) || !(x_max > 0.0)) {
        throw parameter_error("x_max must be positive and finite");
    }
    const double floor_x = 10.0 * std::max(1.0, params.sigma * params.sigma / params.theta);
    if (x_max < floor_x) {
        throw parameter_error("x_max = " + std::to_string(x_max) +
                              " is below the admissible truncation floor " +
                              std::to_string(floor_x));
    }
    if (!(r_tolerance > 0.0) || !std::isfinite(r_tolerance)) {
        throw parameter_error("r_tolerance must be positive");
    }
    if (!(w_zero_tolerance > 0.0) || !std::isfinite(w_zero_tolerance)) {
        throw parameter_error("w_zero_tolerance must be positive");
    }
    if (!(delta > 0.0) || !std::isfinite(delta)) throw parameter_error("delta must be positive");
    if (max_bisection_iters < 1) throw parameter_error("max_bisection_iters must be at least 1");
    if (std::lround(x_max / h) < 10) throw parameter_error("grid must have at least 10 steps");
}

const char* to_string(trajectory_class c) {
    switch (c) {
        case trajectory_class::local_max: return "LocalMax";
        case trajectory_class::hit_zero: return "HitZero";
        case trajectory_class::converged: return "Converged";
        case trajectory_class::exhausted: return "Exhausted";
    }
    return "Unknown";
}

TrajectoryOutcome integrate_W(const DcpParams& params, const ShootingConfig& cfg, double r,
                              bool use_extension) {
    params.validate();
    cfg.validate(params);
    if (!std::isfinite(r) || r < 0.0) throw parameter_error("r must be nonnegative and finite");
    const rhs_eval f = make_rhs(params, cfg, false, use_extension);
    const double sigma2 = params.sigma * params.sigma;
    const long n = std::lround(cfg.x_max / cfg.h);
    const double k = (0.5 * sigma2 * r - legendre_eval(params.cost, -params.p)) / params.alpha;
    std::vector<double> rec_w(static_cast<size_t>(n) + 1);
    std::vector<double> rec_g(static_cast<size_t>(n) + 1);
    const march_out m = march_w(f, k, 0, -params.p, 0.0, n, cfg.h, cfg.w_zero_tolerance,
                                rec_w.data(), rec_g.data());

    TrajectoryOutcome out;
    const long last = m.i_event;
    out.x.resize(static_cast<size_t>(last) + 1);
    out.w.resize(static_cast<size_t>(last) + 1);
    out.wp.resize(static_cast<size_t>(last) + 1);
    for (long i = 0; i <= last; ++i) {
        out.x[static_cast<size_t>(i)] = static_cast<double>(i) * cfg.h;
        out.w[static_cast<size_t>(i)] = rec_w[static_cast<size_t>(i)];
        out.wp[static_cast<size_t>(i)] = rec_g[static_cast<size_t>(i)];
    }
    switch (m.cls) {
        case seg_class::lm:
            out.classification = trajectory_class::local_max;
            out.x_event = static_cast<double>(last) * cfg.h;
            break;
        case seg_class::hz:
            out.classification = trajectory_class::hit_zero;
            out.x_event = m.x_cross;
            out.crossing_slope = m.slope_cross;
            break;
        case seg_class::end:
            if (m.w_last > -cfg.w_zero_tolerance && m.w_last < 0.0 && m.g_last >= 0.0) {
                out.classification = trajectory_class::converged;
            } else {
                out.classification = trajectory_class::exhausted;
                out.note = "no classification event before x_max";
            }
            out.x_event = static_cast<double>(n) * cfg.h;
            break;
        case seg_class::bad:
            out.classification = trajectory_class::exhausted;
            out.x_event = static_cast<double>(last) * cfg.h;
            out.note = "numerical overflow";
            break;
    }
    return out;
}

std::vector<TrajectoryOutcome> classify_sweep(const DcpParams& params, const ShootingConfig& cfg,
                                              const std::vector<double>& r_grid) {
    if (r_grid.empty()) throw parameter_error("r_grid must be nonempty");
    for (size_t i = 0; i < r_grid.size(); ++i) {
        if (!std::isfinite(r_grid[i]) || r_grid[i] < 0.0) {
            throw parameter_error("r_grid values must be nonnegative and finite");
        }
        if (i > 0 && !(r_grid[i] > r_grid[i - 1])) {
            throw parameter_error("r_grid must be strictly ascending");
        }
    }
    std::vector<TrajectoryOutcome> out;
    out.reserve(r_grid.size());
    for (double r : r_grid) out.push_back(integrate_W(params, cfg, r, true));
    return out;
}

ValueFunctionSolution shoot_r_star(const DcpParams& params, const ShootingConfig& cfg) {
    return build_solution(params, cfg, false);
}

ValueFunctionSolution solve_zero_control(const DcpParams& params, const ShootingConfig& cfg) {
    return build_solution(params, cfg, true);
}

double evaluate_policy(const ValueFunctionSolution& sol, double x) {
    if (!(x >= 0.0)) throw domain_error("policy evaluation requires x >= 0");
    if (sol.zero_control) return 0.0;
    if (sol.grid.size() < 2) throw parameter_error("solution has no usable grid");
    const double xq = std::min(x, sol.grid.back());
    const double h = sol.h;
    size_t i = static_cast<size_t>(std::min(xq / h, static_cast<double>(sol.grid.size() - 2)));
    if (i > sol.grid.size() - 2) i = sol.grid.size() - 2;
    double t = (xq - sol.grid[i]) / h;
    t = std::clamp(t, 0.0, 1.0);
    double w = sol.qp[i] + t * (sol.qp[i + 1] - sol.qp[i]);
    w = std::min(w, -sol.w_zero_tolerance);
    return legendre_derivative(sol.cost, w);
}

}  // namespace dcp
