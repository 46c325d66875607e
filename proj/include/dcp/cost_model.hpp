#ifndef DCP_COST_MODEL_HPP
#define DCP_COST_MODEL_HPP

#include <functional>

namespace dcp {

// Arguments this close to 0 are snapped to 0 by the conjugate evaluators.
inline constexpr double conjugate_zero_snap = 1e-12;

enum class cost_kind { exponential, reciprocal_shifted, custom };

// Running control cost C: non-increasing, convex, C(u) > 0, C(u) -> 0.
// evaluate/derivative1/derivative2 are total on u >= 0.
struct CostFunction {
    std::function<double(double)> evaluate;     // C(u) > 0
    std::function<double(double)> derivative1;  // C'(u) <= 0
    std::function<double(double)> derivative2;  // C''(u) >= 0
    double cost_at_zero = 0.0;                  // C(0), finite for admissible costs
    double slope_at_zero = 0.0;                 // C'(0) < 0; may be -infinity
    cost_kind kind = cost_kind::custom;
    double beta = 0.0;       // rate parameter when kind == exponential
    bool admissible = true;  // false only for the conjugate-table-only 1/u cost
};

// C(u) = exp(-beta u); throws parameter_error unless beta > 0
CostFunction make_exponential_cost(double beta);

// C(u) = 1/(u + 1)
CostFunction make_reciprocal_cost();

// C(u) = 1/u: infinite at 0, violates admissibility; accepted only by the
// conjugate table (admissible == false blocks every solver entry point)
CostFunction make_inadmissible_reciprocal_cost();

// Throws parameter_error unless the cost has callbacks, a finite value and a
// finite negative slope at zero effort, and the admissible flag set.
void require_admissible(const CostFunction& cost);

// (C')^{-1}(y) for y in (C'(0), 0): closed form for the built-in families,
// monotone bisection to 1e-12 for custom costs
double slope_inverse(const CostFunction& cost, double y);

// F(y) = sup_{u>=0} { u y - C(u) }, piecewise: 0 at y = 0 (|y| <= 1e-12 is
// treated as 0); -C(0) for y <= C'(0); y (C')^{-1}(y) - C((C')^{-1}(y))
// between.  Throws domain_error for y > 0.
double legendre_eval(const CostFunction& cost, double y);

// F'(y) = (C')^{-1}(y) for C'(0) < y < 0, else 0.  Throws domain_error for
// y >= 0 (F' is unbounded as y -> 0-).
double legendre_derivative(const CostFunction& cost, double y);

// Linear extension: F(y) for y <= -delta, affine with slope F'(-delta) above;
// total on the real line.  Throws parameter_error unless delta > 0.
double legendre_extended(const CostFunction& cost, double delta, double y);

// Bundle of conjugate evaluators sharing one extension knob delta.
struct ConjugatePair {
    std::function<double(double)> F;        // y <= 0
    std::function<double(double)> F_prime;  // y < 0
    std::function<double(double)> F_tilde;  // total
    double delta = 0.0;
};

ConjugatePair make_conjugate(const CostFunction& cost, double delta);

}  // namespace dcp

#endif
