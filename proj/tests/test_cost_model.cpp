#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "dcp/cost_model.hpp"
#include "dcp/errors.hpp"

using namespace dcp;

namespace {

// Pure grid-sup evaluation of sup_{u >= 0} { u y - C(u) }: a coarse uniform
// scan localizes the argmax cell, then two uniform refinements zoom in.  No
// derivative information is used, so this is an independent oracle for the
// closed-form conjugates.
double grid_sup_conjugate(const CostFunction& cost, double y, double u_max) {
    double lo = 0.0;
    double hi = u_max;
    double best_u = 0.0;
    for (int pass = 0; pass < 3; ++pass) {
        const int m = 100000;
        double best = -std::numeric_limits<double>::infinity();
        const double du = (hi - lo) / m;
        for (int i = 0; i <= m; ++i) {
            const double u = lo + du * i;
            const double g = u * y - cost.evaluate(u);
            if (g > best) {
                best = g;
                best_u = u;
            }
        }
        lo = std::max(0.0, best_u - 2.0 * du);
        hi = best_u + 2.0 * du;
    }
    return best_u * y - cost.evaluate(best_u);
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        v[static_cast<size_t>(i)] = a + (b - a) * i / (n - 1);
    }
    return v;
}

}  // namespace

TEST_CASE("exponential cost factory evaluates the family exactly") {
    const CostFunction c = make_exponential_cost(5.0);
    CHECK(c.kind == cost_kind::exponential);
    CHECK(c.beta == 5.0);
    CHECK(c.admissible);
    CHECK(c.cost_at_zero == 1.0);
    CHECK(c.slope_at_zero == -5.0);
    CHECK(c.evaluate(0.0) == 1.0);
    CHECK(c.derivative1(0.0) == -5.0);
    CHECK(c.evaluate(1.0) == doctest::Approx(std::exp(-5.0)).epsilon(1e-15));
    CHECK(c.derivative1(1.0) == doctest::Approx(-5.0 * std::exp(-5.0)).epsilon(1e-15));
    CHECK(c.derivative2(1.0) == doctest::Approx(25.0 * std::exp(-5.0)).epsilon(1e-15));
    CHECK(c.evaluate(50.0) < 1e-8);  // vanishes at large effort

    const CostFunction c1 = make_exponential_cost(1.0);
    CHECK(c1.evaluate(1.0) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
}

TEST_CASE("exponential cost factory rejects bad rates") {
    CHECK_THROWS_AS(make_exponential_cost(0.0), parameter_error);
    CHECK_THROWS_AS(make_exponential_cost(-1.0), parameter_error);
    CHECK_THROWS_AS(make_exponential_cost(std::numeric_limits<double>::quiet_NaN()),
                    parameter_error);
    CHECK_THROWS_AS(make_exponential_cost(std::numeric_limits<double>::infinity()),
                    parameter_error);
}

TEST_CASE("reciprocal cost factory evaluates the family exactly") {
    const CostFunction c = make_reciprocal_cost();
    CHECK(c.kind == cost_kind::reciprocal_shifted);
    CHECK(c.admissible);
    CHECK(c.cost_at_zero == 1.0);
    CHECK(c.slope_at_zero == -1.0);
    CHECK(c.evaluate(0.0) == 1.0);
    CHECK(c.evaluate(1.0) == 0.5);
    CHECK(c.derivative1(3.0) == doctest::Approx(-0.0625).epsilon(1e-15));
    CHECK(c.derivative2(3.0) == doctest::Approx(2.0 / 64.0).epsilon(1e-15));
    CHECK(c.evaluate(1e9) < 1e-8);
}

TEST_CASE("cost families are positive, non-increasing, and convex on a grid") {
    for (const CostFunction& c : {make_exponential_cost(5.0), make_reciprocal_cost()}) {
        const std::vector<double> grid = linspace(0.0, 10.0, 201);
        for (size_t i = 0; i < grid.size(); ++i) {
            CHECK(c.evaluate(grid[i]) > 0.0);
            CHECK(c.evaluate(grid[i]) <= c.cost_at_zero);
            CHECK(c.derivative1(grid[i]) <= 0.0);
            CHECK(c.derivative2(grid[i]) >= 0.0);
            if (i > 0) CHECK(c.evaluate(grid[i]) <= c.evaluate(grid[i - 1]));
            if (i > 0 && i + 1 < grid.size()) {
                const double mid2 = 2.0 * c.evaluate(grid[i]);
                CHECK(mid2 <= c.evaluate(grid[i - 1]) + c.evaluate(grid[i + 1]) + 1e-12);
            }
        }
    }
}

TEST_CASE("inadmissible reciprocal cost is flagged and rejected") {
    const CostFunction c = make_inadmissible_reciprocal_cost();
    CHECK_FALSE(c.admissible);
    CHECK(c.kind == cost_kind::custom);
    CHECK(std::isinf(c.cost_at_zero));
    CHECK(c.slope_at_zero == -std::numeric_limits<double>::infinity());
    CHECK(c.evaluate(2.0) == 0.5);
    CHECK_THROWS_AS(require_admissible(c), parameter_error);
}

TEST_CASE("require_admissible rejects costs without usable callbacks") {
    CostFunction empty;
    CHECK_THROWS_AS(require_admissible(empty), parameter_error);
    CHECK_NOTHROW(require_admissible(make_exponential_cost(5.0)));
    CHECK_NOTHROW(require_admissible(make_reciprocal_cost()));
}

TEST_CASE("slope_inverse matches closed forms and the bisection fallback agrees") {
    const CostFunction ce = make_exponential_cost(5.0);
    // (C')^{-1}(y) = -ln(-y/beta)/beta
    CHECK(slope_inverse(ce, -1.0) == doctest::Approx(std::log(5.0) / 5.0).epsilon(1e-14));
    CHECK(slope_inverse(ce, -5.0) == doctest::Approx(0.0).epsilon(1e-14));

    const CostFunction cr = make_reciprocal_cost();
    // (C')^{-1}(y) = 1/sqrt(-y) - 1
    CHECK(slope_inverse(cr, -0.25) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(slope_inverse(cr, -0.01) == doctest::Approx(9.0).epsilon(1e-10));

    // same family routed through the generic bisection path
    CostFunction custom = make_exponential_cost(5.0);
    custom.kind = cost_kind::custom;
    for (double y : {-4.5, -1.0, -0.1, -0.001}) {
        CHECK(slope_inverse(custom, y) == doctest::Approx(slope_inverse(ce, y)).epsilon(1e-9));
    }

    // unbounded slope at zero: inverse exists for every y < 0
    const CostFunction ci = make_inadmissible_reciprocal_cost();
    CHECK(slope_inverse(ci, -1.0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(slope_inverse(ci, -0.25) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("conjugate of the exponential family hits its frozen values") {
    const CostFunction c = make_exponential_cost(5.0);
    CHECK(legendre_eval(c, 0.0) == 0.0);
    CHECK(legendre_eval(c, -5.0) == -1.0);   // saturated branch starts at C'(0)
    CHECK(legendre_eval(c, -7.0) == -1.0);
    CHECK(legendre_eval(c, -1.0) ==
          doctest::Approx(-0.2 * (1.0 + std::log(5.0))).epsilon(1e-15));
    CHECK(legendre_derivative(c, -1.0) == doctest::Approx(std::log(5.0) / 5.0).epsilon(1e-15));
    CHECK(legendre_derivative(c, -6.0) == 0.0);
    CHECK(legendre_derivative(c, -5.0) == 0.0);
}

TEST_CASE("conjugate of the reciprocal family hits its frozen values") {
    const CostFunction c = make_reciprocal_cost();
    // F(y) = -y - 2 sqrt(-y) on (-1, 0)
    CHECK(legendre_eval(c, -0.25) == doctest::Approx(-0.75).epsilon(1e-15));
    CHECK(legendre_eval(c, -1.0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(legendre_eval(c, -2.0) == -1.0);
    CHECK(legendre_derivative(c, -0.25) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("conjugate of the inadmissible family follows its closed form") {
    const CostFunction c = make_inadmissible_reciprocal_cost();
    // F(y) = -2 sqrt(-y), F'(y) = 1/sqrt(-y)
    CHECK(legendre_eval(c, -1.0) == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(legendre_eval(c, -4.0) == doctest::Approx(-4.0).epsilon(1e-12));
    CHECK(legendre_derivative(c, -4.0) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("conjugate domain rules: snap window, positive arguments rejected") {
    const CostFunction c = make_exponential_cost(5.0);
    CHECK(legendre_eval(c, 1e-13) == 0.0);
    CHECK(legendre_eval(c, -1e-13) == 0.0);
    CHECK_THROWS_AS(legendre_eval(c, 1e-6), domain_error);
    CHECK_THROWS_AS(legendre_eval(c, 1.0), domain_error);
    CHECK_THROWS_AS(legendre_derivative(c, 0.0), domain_error);
    CHECK_THROWS_AS(legendre_derivative(c, 0.5), domain_error);
    CHECK(legendre_derivative(c, -1e-9) > 0.0);
}

TEST_CASE("conjugate agrees with a pure grid-sup oracle on both families") {
    struct family_case {
        CostFunction cost;
        double u_max;
    };
    const family_case cases[] = {{make_exponential_cost(5.0), 8.0},
                                 {make_reciprocal_cost(), 1e8}};
    for (const auto& fc : cases) {
        REQUIRE(fc.cost.evaluate(fc.u_max) < 1e-8);
        const std::vector<double> ys = linspace(2.0 * fc.cost.slope_at_zero, -1e-3, 41);
        for (double y : ys) {
            const double direct = legendre_eval(fc.cost, y);
            const double brute = grid_sup_conjugate(fc.cost, y, fc.u_max);
            CHECK(std::abs(direct - brute) <= 1e-5);
        }
    }
}

TEST_CASE("young identity holds along the active branch") {
    for (const CostFunction& c : {make_exponential_cost(5.0), make_reciprocal_cost()}) {
        const std::vector<double> ys = linspace(c.slope_at_zero, -1e-3, 97);
        for (double y : ys) {
            const double f = legendre_eval(c, y);
            const double fp = legendre_derivative(c, y);
            const double reconstructed = y * fp - c.evaluate(fp);
            CHECK(std::abs(f - reconstructed) <= 1e-8);
        }
    }
}

TEST_CASE("conjugate is non-decreasing, convex, and bounded in [-C(0), 0]") {
    for (const CostFunction& c : {make_exponential_cost(5.0), make_reciprocal_cost()}) {
        const std::vector<double> ys = linspace(2.0 * c.slope_at_zero, -1e-3, 201);
        double prev_f = -c.cost_at_zero - 1.0;
        double prev_fp = -1.0;
        for (double y : ys) {
            const double f = legendre_eval(c, y);
            const double fp = legendre_derivative(c, y);
            CHECK(f <= 0.0);
            CHECK(f >= -c.cost_at_zero);
            CHECK(fp >= 0.0);
            CHECK(f >= prev_f - 1e-12);
            CHECK(fp >= prev_fp - 1e-12);
            prev_f = f;
            prev_fp = fp;
        }
    }
}

TEST_CASE("linear extension matches the conjugate below the knob and is affine above") {
    const CostFunction c = make_exponential_cost(5.0);
    const double delta = 0.1;
    for (double y : {-5.0, -1.0, -0.2, -0.1}) {
        CHECK(legendre_extended(c, delta, y) == legendre_eval(c, y));
    }
    const double f_d = legendre_eval(c, -delta);
    const double fp_d = legendre_derivative(c, -delta);
    CHECK(legendre_extended(c, delta, 0.0) ==
          doctest::Approx(f_d + delta * fp_d).epsilon(1e-14));
    // exact affine continuation: equal slopes over two disjoint chords
    const double s1 = legendre_extended(c, delta, 1.0) - legendre_extended(c, delta, 0.0);
    const double s2 = legendre_extended(c, delta, 3.0) - legendre_extended(c, delta, 2.0);
    CHECK(s1 == doctest::Approx(fp_d).epsilon(1e-12));
    CHECK(s2 == doctest::Approx(fp_d).epsilon(1e-12));
    CHECK_THROWS_AS(legendre_extended(c, 0.0, -1.0), parameter_error);
    CHECK_THROWS_AS(legendre_extended(c, -0.1, -1.0), parameter_error);
}

TEST_CASE("conjugate bundle shares one extension knob") {
    const CostFunction c = make_reciprocal_cost();
    const ConjugatePair pair = make_conjugate(c, 1e-8);
    CHECK(pair.delta == 1e-8);
    for (double y : {-2.0, -0.5, -0.25, -1e-4}) {
        CHECK(pair.F(y) == legendre_eval(c, y));
        CHECK(pair.F_prime(y) == legendre_derivative(c, y));
        CHECK(pair.F_tilde(y) == legendre_extended(c, 1e-8, y));
    }
    CHECK(pair.F_tilde(2.0) == legendre_extended(c, 1e-8, 2.0));
}
