#include "hookroute/noncomposable.hpp"

#include <cmath>

#include "hookroute/errors.hpp"

namespace hookroute {

namespace {

// Maximizer of a concave function on [lo, hi] by bisection on the sign of its derivative.
template <typename F, typename DF>
MeanVarianceResult concave_max(F f, DF df, double lo, double hi, double tol)
{
    if (df(lo) <= 0.0)
        return {lo, f(lo)};
    if (df(hi) >= 0.0)
        return {hi, f(hi)};
    double a = lo;
    double b = hi;
    while (b - a > tol) {
        const double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b)
            break;
        (df(mid) > 0.0 ? a : b) = mid;
    }
    const double x = 0.5 * (a + b);
    return {x, f(x)};
}

double g1_slope(double delta, double r, double r_prime)
{
    return r * r_prime / ((r + delta) * (r + delta));
}

double g2_slope(double delta, double rn, double rn_prime, double alpha)
{
    return 2.0 - (rn_prime / rn) * (1.0 + alpha) * std::pow(delta, alpha);
}

double variance_slope(double delta, const VarianceSpec& spec)
{
    switch (spec.form) {
    case VarianceForm::Constant:
        return 0.0;
    case VarianceForm::Linear:
        return spec.beta;
    case VarianceForm::Superlinear:
        return spec.beta * spec.exponent * std::pow(delta, spec.exponent - 1.0);
    case VarianceForm::Quadratic:
        return 2.0 * spec.beta * delta;
    }
    return 0.0;
}

double return_slope(const HookScenario& s, double delta)
{
    return -g1_slope(s.total - delta, s.r, s.r_prime) + g2_slope(delta, s.rn, s.rn_prime, s.alpha);
}

} // namespace

std::string to_string(VarianceForm form)
{
    switch (form) {
    case VarianceForm::Constant:
        return "constant";
    case VarianceForm::Linear:
        return "linear";
    case VarianceForm::Superlinear:
        return "superlinear";
    case VarianceForm::Quadratic:
        return "quadratic";
    }
    return "linear";
}

VarianceForm variance_form_from_string(const std::string& name)
{
    for (auto f : {VarianceForm::Constant, VarianceForm::Linear, VarianceForm::Superlinear, VarianceForm::Quadratic})
        if (to_string(f) == name)
            return f;
    throw InvalidInput("unknown variance form '" + name + "'");
}

void HookScenario::validate() const
{
    if (!(total > 0.0))
        throw InvalidInput("total trade must be positive");
    if (!(r > 0.0) || !(r_prime > 0.0) || !(rn > 0.0) || !(rn_prime > 0.0))
        throw InvalidInput("reserves must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw InvalidInput("alpha must lie in [0, 1]");
    if (!(variance.beta >= 0.0))
        throw InvalidInput("beta must be nonnegative");
    if (variance.form == VarianceForm::Superlinear && !(variance.exponent > 1.0 && variance.exponent < 2.0))
        throw InvalidInput("superlinear exponent must lie in (1, 2)");
    if (!(lambda >= 0.0))
        throw InvalidInput("lambda must be nonnegative");
}

double g1(double delta, double r, double r_prime)
{
    return r_prime - r * r_prime / (r + delta);
}

double g2(double delta, double rn, double rn_prime, double alpha)
{
    return 2.0 * delta - (rn_prime / rn) * std::pow(delta, 1.0 + alpha);
}

double variance(double delta, const VarianceSpec& spec)
{
    switch (spec.form) {
    case VarianceForm::Constant:
        return spec.beta;
    case VarianceForm::Linear:
        return spec.beta * delta;
    case VarianceForm::Superlinear:
        return spec.beta * std::pow(delta, spec.exponent);
    case VarianceForm::Quadratic:
        return spec.beta * delta * delta;
    }
    return 0.0;
}

double combined_return(const HookScenario& s, double delta)
{
    return g1(s.total - delta, s.r, s.r_prime) + g2(delta, s.rn, s.rn_prime, s.alpha);
}

double mean_variance_objective(const HookScenario& s, double delta)
{
    return combined_return(s, delta) - s.lambda * variance(delta, s.variance);
}

MeanVarianceResult mean_variance_solve(const HookScenario& s)
{
    s.validate();
    return concave_max([&](double x) { return mean_variance_objective(s, x); },
                       [&](double x) { return return_slope(s, x) - s.lambda * variance_slope(x, s.variance); }, 0.0,
                       s.total, 1e-12);
}

MeanVarianceResult max_return(const HookScenario& s)
{
    s.validate();
    return concave_max([&](double x) { return combined_return(s, x); }, [&](double x) { return return_slope(s, x); },
                       0.0, s.total, 1e-12);
}

std::vector<FrontierPoint> efficient_frontier(const HookScenario& s, std::span<const double> tau_grid)
{
    s.validate();
    const auto peak = max_return(s);
    std::vector<FrontierPoint> out;
    out.reserve(tau_grid.size());
    for (double tau : tau_grid) {
        FrontierPoint pt;
        pt.tau = tau;
        if (!std::isfinite(tau))
            throw InvalidInput("target returns must be finite");
        if (combined_return(s, 0.0) >= tau) {
            pt.feasible = true;
        } else if (peak.objective >= tau) {
            // return is concave, so it crosses tau once on [0, argmax]
            double lo = 0.0;
            double hi = peak.delta_star;
            while (hi - lo > 1e-10)
                (combined_return(s, 0.5 * (lo + hi)) >= tau ? hi : lo) = 0.5 * (lo + hi);
            pt.delta_star = hi;
            pt.feasible = true;
        }
        if (pt.feasible)
            pt.variance_star = variance(pt.delta_star, s.variance);
        out.push_back(pt);
    }
    return out;
}

} // namespace hookroute
