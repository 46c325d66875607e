#ifndef DCP_HJB_SOLVER_HPP
#define DCP_HJB_SOLVER_HPP

#include <string>
#include <vector>

#include "dcp/cost_model.hpp"

namespace dcp {

// Problem data for the drift control problem on the half line.
struct DcpParams {
    double sigma = 1.0;  // diffusion scale, > 0
    double theta = 0.5;  // restoring drift slope, > 0
    double alpha = 0.5;  // discount rate, > 0
    double p = 1.0;      // boundary (local-time) penalty, > 0
    CostFunction cost;

    void validate() const;  // throws parameter_error on any violation
};

// Discretization and search knobs for the shooting solver.
struct ShootingConfig {
    double h = 1e-4;                // grid spacing
    double x_max = 20.0;            // returned domain truncation
    double r_tolerance = 1e-9;      // bisection bracket width on r
    double w_zero_tolerance = 1e-6; // threshold for "converged to 0-"
    double delta = 1e-8;            // linear-extension knob for F-tilde
    int max_bisection_iters = 200;

    void validate(const DcpParams& params) const;  // x_max >= 10*max(1, sigma^2/theta), etc.
};

enum class trajectory_class { local_max, hit_zero, converged, exhausted };

const char* to_string(trajectory_class c);

// One marched trajectory of the shooting family, cut at its first event.
struct TrajectoryOutcome {
    trajectory_class classification = trajectory_class::exhausted;
    double x_event = 0.0;            // interpolated crossing for hit_zero
    double crossing_slope = 0.0;     // interpolated W' at the crossing (hit_zero only)
    std::vector<double> x, w, wp;    // grid samples up to and including the event node
    std::string note;                // diagnostics for exhausted outcomes
};

// Grid solution of the free-boundary problem: Q, Q' = W at the located r*,
// and everything needed to evaluate the feedback policy.
struct ValueFunctionSolution {
    double r_star = 0.0;
    std::vector<double> grid;  // x_i = i h, 0..x_max
    std::vector<double> q;     // value samples, positive, decreasing, convex
    std::vector<double> qp;    // Q' samples, in [-p, 0), qp[0] == -p exactly
    double k_r_star = 0.0;     // integration constant; equals q[0]
    double bracket_lo = 0.0;   // final bisection bracket on r
    double bracket_hi = 0.0;
    double h = 0.0;
    double x_max = 0.0;
    double w_zero_tolerance = 1e-6;
    double delta = 1e-8;
    CostFunction cost;
    bool zero_control = false;  // built by solve_zero_control; policy is u == 0
};

// Marches W from W(0) = -p (trapezoid running integral, Heun update) until the
// first classification event or x_max.  With use_extension the nonlinear term
// uses the linear extension; without it, any nonnegative stage value is
// reclassified as a zero crossing.
TrajectoryOutcome integrate_W(const DcpParams& params, const ShootingConfig& cfg, double r,
                              bool use_extension);

// integrate_W over an ascending r grid; classifications are monotone in r
// (all local_max below the crossing family, hit_zero above).
std::vector<TrajectoryOutcome> classify_sweep(const DcpParams& params, const ShootingConfig& cfg,
                                              const std::vector<double>& r_grid);

// Locates r* by bracket doubling from r = 1 plus bisection, then assembles the
// certified solution grid on [0, x_max] and verifies every solution invariant.
// The march is continued internally past x_max so that the returned samples
// stay on the bracketed trajectory; see the implementation notes.
ValueFunctionSolution shoot_r_star(const DcpParams& params, const ShootingConfig& cfg);

// Same machinery with the nonlinear term dropped and boundary slope -1;
// returns U with U > 0 decreasing convex and -1 <= U' < 0.  The zero-control
// cost identity is J = C(0)/alpha + p U(x).
ValueFunctionSolution solve_zero_control(const DcpParams& params, const ShootingConfig& cfg);

// Feedback policy u*(x): linear interpolation of Q', clipped away from 0- by
// w_zero_tolerance, then F'.  Beyond x_max returns the x_max value.
double evaluate_policy(const ValueFunctionSolution& sol, double x);

}  // namespace dcp

#endif
