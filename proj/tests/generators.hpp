#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "hookroute/cfmm.hpp"
#include "hookroute/noncomposable.hpp"
#include "hookroute/routing.hpp"

namespace hookroute::testing {

/// Seeded source for the randomized property checks.
class Gen
{
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

    /// Log-uniform on [lo, hi], lo > 0.
    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }

    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

    bool coin() { return integer(0, 1) == 1; }

    Market product()
    {
        return Market::product(log_uniform(0.5, 200.0), log_uniform(0.5, 200.0), uniform(0.95, 1.0));
    }

    Market geometric(int n)
    {
        Eigen::VectorXd w(n), r(n);
        for (int i = 0; i < n; ++i) {
            w(i) = uniform(0.5, 3.0);
            r(i) = log_uniform(0.5, 50.0);
        }
        return Market::geometric_mean(w, r, uniform(0.95, 1.0));
    }

    LimitOrder order(int in = 0, int out = 1)
    {
        LimitOrder o;
        o.price = log_uniform(0.1, 4.0);
        o.volume = log_uniform(0.1, 20.0);
        o.input_asset = in;
        o.output_asset = out;
        return o;
    }

private:
    std::mt19937_64 rng_;
};

/// One input asset, one output asset, two legs. Prices are drawn so that no
/// cycle through the legs is profitable, which input splits alone cannot exploit.
inline RoutingProblem random_two_leg(Gen& gen)
{
    RoutingProblem p;
    p.n_assets = 2;
    const int shape = gen.integer(0, 2);
    if (shape <= 1)
        p.markets.push_back({gen.product(), {0, 1}});
    if (shape == 0) {
        const auto& first = p.markets[0].market;
        Market second = gen.coin() ? gen.product() : gen.geometric(2);
        // fee-free spot rates within a factor fee1 * fee2 of each other leave no cycle
        const double band = first.fee * second.fee;
        const double target = marginal_rate(first, 0, 1, 0.0) / first.fee * gen.uniform(band, 1.0 / band);
        second.reserves(1) *= target / (marginal_rate(second, 0, 1, 0.0) / second.fee);
        p.markets.push_back({second, {0, 1}});
    }
    // an order is no better than the best pool's rate net of fees
    const double ceiling = p.markets.empty() ? 1.0 : marginal_rate(p.markets[0].market, 0, 1, 0.0);
    for (int k = p.markets.empty() ? 2 : (shape == 1 ? 1 : 0); k > 0; --k) {
        auto o = gen.order();
        o.price = ceiling * gen.uniform(0.3, 1.0);
        p.orders.push_back(o);
    }
    p.utility = {0, 1, gen.log_uniform(0.1, 50.0)};
    return p;
}

/// Best point of an n-point grid on [lo, hi].
inline double grid_best(const HookScenario& s, double lo, double hi, int points)
{
    double best_x = lo;
    double best = mean_variance_objective(s, lo);
    for (int i = 1; i <= points; ++i) {
        const double x = lo + (hi - lo) * i / points;
        const double v = mean_variance_objective(s, x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    return best_x;
}

/// Grid search on [0, D], then again on the cells around the winner.
inline double grid_argmax(const HookScenario& s, int points)
{
    const double coarse = grid_best(s, 0.0, s.total, points);
    const double h = s.total / points;
    return grid_best(s, std::max(0.0, coarse - 2.0 * h), std::min(s.total, coarse + 2.0 * h), points);
}

/// Central difference of f at x.
template <typename F>
double central_difference(F&& f, double x, double h = 1e-6)
{
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Composite Simpson rule with n (even) panels.
template <typename F>
double simpson(F&& f, double a, double b, int n = 2000)
{
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i)
        acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return acc * h / 3.0;
}

/// Root of a decreasing function on [lo, hi] by plain bisection.
template <typename F>
double bisect_decreasing(F&& f, double lo, double hi, int iters = 200)
{
    for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace hookroute::testing
