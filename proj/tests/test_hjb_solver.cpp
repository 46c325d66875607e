#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "dcp/cost_model.hpp"
#include "dcp/errors.hpp"
#include "dcp/hjb_solver.hpp"

using namespace dcp;

namespace {

DcpParams fig2_params() {
    DcpParams p;
    p.sigma = 1.0;
    p.theta = 0.5;
    p.alpha = 0.5;
    p.p = 1.0;
    p.cost = make_exponential_cost(5.0);
    return p;
}

// Values frozen from an independent reimplementation of the same scheme
// (separate language and code path, h = 1e-4), quantized to 10 decimals.
struct frozen_node {
    double x;
    double w;
    double q;
};
const frozen_node fig2_table[] = {
    {1.0, -0.4448939330, 1.3532339419},
    {2.0, -0.2486082075, 1.0206301128},
    {4.0, -0.1102430510, 0.6898381163},
    {20.0, -0.0086919798, 0.2001773190},
};
constexpr double fig2_r_star = 0.977923791794476;
constexpr double fig2_q0 = 2.0216989568;

double max_interior_residual(const ValueFunctionSolution& sol, const DcpParams& params) {
    const double sigma2 = params.sigma * params.sigma;
    double worst = 0.0;
    for (size_t i = 1; i + 1 < sol.grid.size(); ++i) {
        const double qpp = (sol.qp[i + 1] - sol.qp[i - 1]) / (2.0 * sol.h);
        const double f = sol.zero_control ? 0.0 : legendre_eval(params.cost, sol.qp[i]);
        const double res = 0.5 * sigma2 * qpp - f - params.theta * sol.grid[i] * sol.qp[i] -
                           params.alpha * sol.q[i];
        worst = std::max(worst, std::abs(res));
    }
    return worst;
}

// Bounded solution of sigma^2/2 U'' - theta x U' - alpha U = 0 with
// U'(0) = -1, in closed form for alpha == theta:
// U(x) = A exp(theta x^2 / sigma^2) erfc(sqrt(theta) x / sigma),
// A = sigma sqrt(pi) / (2 sqrt(theta)).
double zero_control_exact(double sigma, double theta, double x) {
    const double a = 0.5 * sigma * std::sqrt(M_PI / theta);
    const double z = std::sqrt(theta) * x / sigma;
    return a * std::exp(z * z) * std::erfc(z);
}

}  // namespace

TEST_CASE("critical slope and value at zero match the frozen solution") {
    const DcpParams params = fig2_params();
    const ShootingConfig cfg;
    const ValueFunctionSolution sol = shoot_r_star(params, cfg);

    CHECK(std::abs(sol.r_star - fig2_r_star) < 1e-9);
    CHECK(sol.bracket_hi - sol.bracket_lo < cfg.r_tolerance);
    CHECK(sol.bracket_lo <= sol.r_star);
    CHECK(sol.r_star <= sol.bracket_hi);
    CHECK(std::abs(sol.q[0] - fig2_q0) < 1e-9);
    CHECK(sol.q[0] == sol.k_r_star);

    // integration-constant identity k = (sigma^2 r / 2 - F(-p)) / alpha
    const double f_at_start = legendre_eval(params.cost, -params.p);
    const double k_expected = (0.5 * sol.r_star - f_at_start) / params.alpha;
    CHECK(sol.k_r_star == doctest::Approx(k_expected).epsilon(1e-14));

    CHECK(sol.h == cfg.h);
    CHECK(sol.x_max == doctest::Approx(cfg.x_max));
    CHECK(sol.grid.size() == 200001);
    CHECK(sol.grid[12345] == doctest::Approx(1.2345).epsilon(1e-15));
}

TEST_CASE("solution grid matches the frozen trajectory samples") {
    const ValueFunctionSolution sol = shoot_r_star(fig2_params(), ShootingConfig{});
    for (const frozen_node& node : fig2_table) {
        const size_t i = static_cast<size_t>(std::lround(node.x / sol.h));
        CAPTURE(node.x);
        CHECK(std::abs(sol.qp[i] - node.w) < 5e-9);
        CHECK(std::abs(sol.q[i] - node.q) < 5e-9);
    }
}

TEST_CASE("solution satisfies every pointwise invariant") {
    const DcpParams params = fig2_params();
    const ValueFunctionSolution sol = shoot_r_star(params, ShootingConfig{});

    CHECK(sol.qp[0] == -1.0);  // boundary slope, exact
    for (size_t i = 0; i < sol.grid.size(); ++i) {
        REQUIRE(sol.qp[i] < 0.0);
        REQUIRE(sol.qp[i] >= -1.0);
        REQUIRE(sol.q[i] > 0.0);
        if (i > 0) {
            REQUIRE(sol.qp[i] >= sol.qp[i - 1] - 1e-12);  // convex value
            REQUIRE(sol.q[i] < sol.q[i - 1]);             // strictly decreasing
        }
    }
    CHECK(max_interior_residual(sol, params) <= 1e-6);
}

TEST_CASE("pointwise optimality of the conjugate holds against constant controls") {
    const DcpParams params = fig2_params();
    const ValueFunctionSolution sol = shoot_r_star(params, ShootingConfig{});
    const double sigma2 = params.sigma * params.sigma;
    for (double u : {0.0, 0.25, 1.0, 4.0}) {
        const double cu = params.cost.evaluate(u);
        double worst = 0.0;
        for (size_t i = 1; i + 1 < sol.grid.size(); ++i) {
            const double qpp = (sol.qp[i + 1] - sol.qp[i - 1]) / (2.0 * sol.h);
            const double lhs = 0.5 * sigma2 * qpp - u * sol.qp[i] -
                               params.theta * sol.grid[i] * sol.qp[i] - params.alpha * sol.q[i] +
                               cu;
            worst = std::min(worst, lhs);
        }
        CAPTURE(u);
        CHECK(worst >= -1e-6);
    }
}

TEST_CASE("feedback policy evaluates the conjugate derivative of the slope") {
    const DcpParams params = fig2_params();
    const auto sol = std::make_shared<ValueFunctionSolution>(shoot_r_star(params, ShootingConfig{}));

    CHECK(evaluate_policy(*sol, 0.0) == doctest::Approx(std::log(5.0) / 5.0).epsilon(1e-12));
    CHECK(std::abs(evaluate_policy(*sol, 1.0) - 0.4838714581) < 1e-8);
    CHECK(std::abs(evaluate_policy(*sol, 20.0) - 1.2709584910) < 1e-8);

    // non-decreasing along the state axis, constant beyond the grid edge
    double prev = -1.0;
    for (double x = 0.0; x <= 20.0; x += 0.25) {
        const double u = evaluate_policy(*sol, x);
        CHECK(u >= prev - 1e-12);
        prev = u;
    }
    CHECK(evaluate_policy(*sol, 25.0) == evaluate_policy(*sol, 20.0));
    CHECK(evaluate_policy(*sol, 1e9) == evaluate_policy(*sol, 20.0));
    CHECK_THROWS_AS(evaluate_policy(*sol, -0.5), domain_error);
}

TEST_CASE("zero-control solution matches the closed-form bounded solution") {
    const DcpParams params = fig2_params();  // alpha == theta, closed form applies
    const ValueFunctionSolution sol = solve_zero_control(params, ShootingConfig{});

    CHECK(sol.zero_control);
    CHECK(sol.qp[0] == -1.0);
    for (double x : {0.0, 0.5, 1.0, 2.0, 5.0, 10.0}) {
        const size_t i = static_cast<size_t>(std::lround(x / sol.h));
        CAPTURE(x);
        CHECK(std::abs(sol.q[i] - zero_control_exact(params.sigma, params.theta, x)) < 1e-6);
    }
    CHECK(std::abs(sol.q[0] - std::sqrt(M_PI / 2.0)) < 1e-7);
    CHECK(max_interior_residual(sol, params) <= 1e-6);
    for (size_t i = 0; i < sol.grid.size(); ++i) {
        REQUIRE(sol.qp[i] < 0.0);
        REQUIRE(sol.qp[i] >= -1.0);
        REQUIRE(sol.q[i] > 0.0);
    }
    CHECK(evaluate_policy(sol, 0.0) == 0.0);
    CHECK(evaluate_policy(sol, 3.0) == 0.0);
}

TEST_CASE("reciprocal cost family solves end to end") {
    DcpParams params = fig2_params();
    params.cost = make_reciprocal_cost();
    const ValueFunctionSolution sol = shoot_r_star(params, ShootingConfig{});
    CHECK(sol.qp[0] == -1.0);
    CHECK(sol.r_star > 0.0);
    CHECK(sol.q[0] > 0.0);
    CHECK(max_interior_residual(sol, params) <= 1e-6);
    // slope at zero saturates the conjugate exactly at the boundary: u*(0) = 0
    CHECK(evaluate_policy(sol, 0.0) == 0.0);
    CHECK(evaluate_policy(sol, 5.0) > 0.0);
}

TEST_CASE("critical slope is stable under grid refinement") {
    const DcpParams params = fig2_params();
    ShootingConfig coarse;
    ShootingConfig fine;
    fine.h = 0.5 * coarse.h;
    const double r_coarse = shoot_r_star(params, coarse).r_star;
    const double r_fine = shoot_r_star(params, fine).r_star;
    CHECK(std::abs(r_coarse - r_fine) < 10.0 * coarse.r_tolerance);
}

TEST_CASE("trajectory classification events fire as the theory dictates") {
    const DcpParams params = fig2_params();
    const ShootingConfig cfg;

    SUBCASE("zero slope attains its maximum immediately") {
        const TrajectoryOutcome out = integrate_W(params, cfg, 0.0, true);
        CHECK(out.classification == trajectory_class::local_max);
        CHECK(out.x_event == 0.0);
        REQUIRE(out.w.size() == 1);
        CHECK(out.w[0] == -1.0);
    }
    SUBCASE("small slope stays below the axis") {
        const TrajectoryOutcome out = integrate_W(params, cfg, 0.1, true);
        CHECK(out.classification == trajectory_class::local_max);
        for (double w : out.w) CHECK(w < 0.0);
    }
    SUBCASE("large slope crosses with positive speed") {
        const TrajectoryOutcome out = integrate_W(params, cfg, 50.0, true);
        CHECK(out.classification == trajectory_class::hit_zero);
        CHECK(out.x_event > 0.0);
        CHECK(out.crossing_slope > 1e-6);
        REQUIRE(out.w.size() >= 2);
        CHECK(out.w.back() >= 0.0);
        for (size_t i = 0; i + 1 < out.w.size(); ++i) CHECK(out.w[i] < 0.0);
    }
    SUBCASE("crossing detection does not depend on the linear extension") {
        const TrajectoryOutcome with_ext = integrate_W(params, cfg, 2.0, true);
        const TrajectoryOutcome without = integrate_W(params, cfg, 2.0, false);
        CHECK(with_ext.classification == trajectory_class::hit_zero);
        CHECK(without.classification == trajectory_class::hit_zero);
        CHECK(std::abs(with_ext.x_event - without.x_event) < 1e-3);
    }
    SUBCASE("invalid slopes are rejected") {
        CHECK_THROWS_AS(integrate_W(params, cfg, -1.0, true), parameter_error);
        CHECK_THROWS_AS(integrate_W(params, cfg, std::numeric_limits<double>::quiet_NaN(), true),
                        parameter_error);
    }
}

TEST_CASE("no trajectory shows a positive local maximum or negative local minimum") {
    const DcpParams params = fig2_params();
    const ShootingConfig cfg;
    for (double r : {0.3, 0.9, 1.1, 3.0}) {
        const TrajectoryOutcome out = integrate_W(params, cfg, r, true);
        CAPTURE(r);
        // interior samples stay strictly below the axis; only a crossing event
        // may produce a nonnegative final sample
        for (size_t i = 0; i + 1 < out.w.size(); ++i) REQUIRE(out.w[i] < 0.0);
        if (out.classification == trajectory_class::local_max) {
            CHECK(out.w.back() < 0.0);
            CHECK(out.wp.back() <= 0.0);
        } else {
            REQUIRE(out.classification == trajectory_class::hit_zero);
            CHECK(out.crossing_slope > 0.0);
        }
    }
}

TEST_CASE("classification sweep splits into a prefix and a suffix") {
    const DcpParams params = fig2_params();
    const ShootingConfig cfg;
    const std::vector<double> r_grid = {0.0, 0.2, 0.5, 0.9, 0.95, 1.0, 1.2, 2.0, 10.0, 50.0};
    const std::vector<TrajectoryOutcome> outs = classify_sweep(params, cfg, r_grid);
    REQUIRE(outs.size() == r_grid.size());

    long n_lm = 0;
    long n_hz = 0;
    bool seen_hz = false;
    for (const TrajectoryOutcome& out : outs) {
        if (out.classification == trajectory_class::local_max) {
            CHECK_FALSE(seen_hz);  // no interleaving
            ++n_lm;
        } else if (out.classification == trajectory_class::hit_zero) {
            seen_hz = true;
            ++n_hz;
        }
    }
    CHECK(n_lm >= 1);
    CHECK(n_hz >= 1);
    CHECK(n_lm + n_hz == static_cast<long>(outs.size()));
    // the split brackets the located critical slope
    CHECK(outs[4].classification == trajectory_class::local_max);   // r = 0.95
    CHECK(outs[5].classification == trajectory_class::hit_zero);    // r = 1.0
}

TEST_CASE("classification sweep validates its grid") {
    const DcpParams params = fig2_params();
    const ShootingConfig cfg;
    CHECK_THROWS_AS(classify_sweep(params, cfg, {}), parameter_error);
    CHECK_THROWS_AS(classify_sweep(params, cfg, {0.5, 0.5}), parameter_error);
    CHECK_THROWS_AS(classify_sweep(params, cfg, {1.0, 0.5}), parameter_error);
    CHECK_THROWS_AS(classify_sweep(params, cfg, {-1.0, 0.5}), parameter_error);
}

TEST_CASE("trajectories are ordered pointwise in the shooting parameter") {
    const DcpParams params = fig2_params();
    const ShootingConfig cfg;
    const double sigma2 = params.sigma * params.sigma;
    const double f_start = legendre_eval(params.cost, -params.p);

    auto y_samples = [&](const TrajectoryOutcome& out, double r) {
        const double k = (0.5 * sigma2 * r - f_start) / params.alpha;
        std::vector<double> y(out.w.size());
        double cum = 0.0;
        y[0] = k;
        for (size_t i = 1; i < out.w.size(); ++i) {
            cum += 0.5 * cfg.h * (out.w[i - 1] + out.w[i]);
            y[i] = k + cum;
        }
        return y;
    };

    const std::pair<double, double> pairs[] = {{0.5, 0.9}, {0.5, 1.2}, {0.9, 1.1}};
    for (const auto& [r2, r1] : pairs) {
        REQUIRE(r2 < r1);
        const TrajectoryOutcome lo = integrate_W(params, cfg, r2, true);
        const TrajectoryOutcome hi = integrate_W(params, cfg, r1, true);
        const std::vector<double> y_lo = y_samples(lo, r2);
        const std::vector<double> y_hi = y_samples(hi, r1);
        const size_t shared = std::min(lo.w.size(), hi.w.size());
        REQUIRE(shared >= 2);
        CAPTURE(r2);
        CAPTURE(r1);
        CHECK(lo.w[0] == hi.w[0]);  // common boundary value
        for (size_t i = 0; i + 1 < shared; ++i) {
            REQUIRE(lo.w[i] <= hi.w[i] + 1e-9);
            REQUIRE(lo.wp[i] < hi.wp[i] + 1e-9);
            REQUIRE(y_lo[i] < y_hi[i] + 1e-9);
        }
        // strict separation away from the shared start
        CHECK(lo.w[shared / 2] < hi.w[shared / 2]);
    }
}

TEST_CASE("solver rejects invalid problem and grid parameters") {
    DcpParams params = fig2_params();
    const ShootingConfig cfg;

    SUBCASE("scalar positivity") {
        DcpParams bad = params;
        bad.sigma = 0.0;
        CHECK_THROWS_AS(shoot_r_star(bad, cfg), parameter_error);
        bad = params;
        bad.theta = -0.5;
        CHECK_THROWS_AS(shoot_r_star(bad, cfg), parameter_error);
        bad = params;
        bad.alpha = 0.0;
        CHECK_THROWS_AS(shoot_r_star(bad, cfg), parameter_error);
        bad = params;
        bad.p = 0.0;
        CHECK_THROWS_AS(shoot_r_star(bad, cfg), parameter_error);
    }
    SUBCASE("inadmissible cost") {
        DcpParams bad = params;
        bad.cost = make_inadmissible_reciprocal_cost();
        CHECK_THROWS_AS(shoot_r_star(bad, cfg), parameter_error);
    }
    SUBCASE("grid constraints") {
        ShootingConfig bad = cfg;
        bad.h = 0.0;
        CHECK_THROWS_AS(shoot_r_star(params, bad), parameter_error);
        bad = cfg;
        bad.x_max = 5.0;  // below the truncation floor 10 max(1, sigma^2/theta)
        CHECK_THROWS_AS(shoot_r_star(params, bad), parameter_error);
        bad = cfg;
        bad.r_tolerance = 0.0;
        CHECK_THROWS_AS(shoot_r_star(params, bad), parameter_error);
        bad = cfg;
        bad.delta = -1e-8;
        CHECK_THROWS_AS(shoot_r_star(params, bad), parameter_error);
    }
}

TEST_CASE("repeated solves are bit-identical") {
    const DcpParams params = fig2_params();
    const ShootingConfig cfg;
    const ValueFunctionSolution a = shoot_r_star(params, cfg);
    const ValueFunctionSolution b = shoot_r_star(params, cfg);
    CHECK(a.r_star == b.r_star);
    CHECK(a.q == b.q);
    CHECK(a.qp == b.qp);
}
