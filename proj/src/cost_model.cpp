#include "dcp/cost_model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dcp/errors.hpp"

namespace dcp {

CostFunction make_exponential_cost(double beta) {
    if (!std::isfinite(beta) || !(beta > 0.0))
        throw parameter_error("make_exponential_cost: beta must be positive and finite, got " +
                              std::to_string(beta));
    CostFunction c;
    c.evaluate = [beta](double u) { return std::exp(-beta * u); };
    c.derivative1 = [beta](double u) { return -beta * std::exp(-beta * u); };
    c.derivative2 = [beta](double u) { return beta * beta * std::exp(-beta * u); };
    c.cost_at_zero = 1.0;
    c.slope_at_zero = -beta;
    c.kind = cost_kind::exponential;
    c.beta = beta;
    return c;
}

CostFunction make_reciprocal_cost() {
    CostFunction c;
    c.evaluate = [](double u) { return 1.0 / (u + 1.0); };
    c.derivative1 = [](double u) { return -1.0 / ((u + 1.0) * (u + 1.0)); };
    c.derivative2 = [](double u) { return 2.0 / ((u + 1.0) * (u + 1.0) * (u + 1.0)); };
    c.cost_at_zero = 1.0;
    c.slope_at_zero = -1.0;
    c.kind = cost_kind::reciprocal_shifted;
    return c;
}

CostFunction make_inadmissible_reciprocal_cost() {
    CostFunction c;
    c.evaluate = [](double u) { return 1.0 / u; };
    c.derivative1 = [](double u) { return -1.0 / (u * u); };
    c.derivative2 = [](double u) { return 2.0 / (u * u * u); };
    c.cost_at_zero = std::numeric_limits<double>::infinity();
    c.slope_at_zero = -std::numeric_limits<double>::infinity();
    c.kind = cost_kind::custom;
    c.admissible = false;
    return c;
}

void require_admissible(const CostFunction& cost) {
    if (!cost.evaluate || !cost.derivative1) {
        throw parameter_error("cost function callbacks must be set");
    }
    if (!cost.admissible || !std::isfinite(cost.cost_at_zero) ||
        !std::isfinite(cost.slope_at_zero)) {
        throw parameter_error("cost must be admissible: finite value and slope at zero effort");
    }
    if (!(cost.slope_at_zero < 0.0)) {
        throw parameter_error("cost slope at zero effort must be negative");
    }
}

double slope_inverse(const CostFunction& cost, double y) {
    switch (cost.kind) {
        case cost_kind::exponential:
            // C'(u) = -beta e^{-beta u} = y  =>  u = -ln(-y/beta)/beta
            return -std::log(-y / cost.beta) / cost.beta;
        case cost_kind::reciprocal_shifted:
            // C'(u) = -1/(u+1)^2 = y  =>  u = 1/sqrt(-y) - 1
            return 1.0 / std::sqrt(-y) - 1.0;
        case cost_kind::custom:
            break;
    }
    if (!std::isfinite(cost.slope_at_zero)) {
        // C'(0) = -inf (the 1/u table case): C' is increasing from -inf to 0-
        // on (0, inf); bracket from a positive left endpoint.
        double lo = conjugate_zero_snap, hi = 1.0;
        while (cost.derivative1(hi) < y) hi *= 2.0;
        while (cost.derivative1(lo) > y) lo *= 0.5;
        for (int i = 0; i < 200 && hi - lo > 1e-12 * (1.0 + hi); ++i) {
            const double mid = 0.5 * (lo + hi);
            (cost.derivative1(mid) < y ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }
    // C' is continuous and non-decreasing (convexity): bisect on [0, hi]
    double lo = 0.0, hi = 1.0;
    while (cost.derivative1(hi) < y) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
        const double mid = 0.5 * (lo + hi);
        (cost.derivative1(mid) < y ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double legendre_eval(const CostFunction& cost, double y) {
    if (y > conjugate_zero_snap)
        throw domain_error("legendre_eval: y > 0 is outside the conjugate's finite domain");
    if (y >= -conjugate_zero_snap) return 0.0;
    if (y <= cost.slope_at_zero) return -cost.cost_at_zero;
    switch (cost.kind) {
        case cost_kind::exponential:
            // u = -ln(-y/beta)/beta and C(u) = -y/beta collapse to one log
            return (y / cost.beta) * (1.0 - std::log(-y / cost.beta));
        case cost_kind::reciprocal_shifted:
            // u = 1/sqrt(-y) - 1 and C(u) = sqrt(-y)
            return -y - 2.0 * std::sqrt(-y);
        case cost_kind::custom:
            break;
    }
    const double u = slope_inverse(cost, y);
    return y * u - cost.evaluate(u);
}

double legendre_derivative(const CostFunction& cost, double y) {
    if (y >= 0.0)
        throw domain_error("legendre_derivative: requires y < 0");
    if (y <= cost.slope_at_zero) return 0.0;
    return slope_inverse(cost, y);
}

double legendre_extended(const CostFunction& cost, double delta, double y) {
    if (!(delta > 0.0))
        throw parameter_error("legendre_extended: delta must be > 0");
    if (y <= -delta) return legendre_eval(cost, y);
    return legendre_derivative(cost, -delta) * (y + delta) + legendre_eval(cost, -delta);
}

ConjugatePair make_conjugate(const CostFunction& cost, double delta) {
    if (!(delta > 0.0))
        throw parameter_error("make_conjugate: delta must be > 0");
    ConjugatePair pair;
    pair.delta = delta;
    pair.F = [cost](double y) { return legendre_eval(cost, y); };
    pair.F_prime = [cost](double y) { return legendre_derivative(cost, y); };
    // freeze the junction values so the extension branch needs no re-evaluation
    const double f_at = legendre_eval(cost, -delta);
    const double fp_at = legendre_derivative(cost, -delta);
    pair.F_tilde = [cost, delta, f_at, fp_at](double y) {
        if (y <= -delta) return legendre_eval(cost, y);
        return fp_at * (y + delta) + f_at;
    };
    return pair;
}

}  // namespace dcp
