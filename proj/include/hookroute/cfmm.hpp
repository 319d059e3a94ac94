#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hookroute/errors.hpp"

namespace hookroute {

enum class MarketKind { ConstantProduct, GeometricMean, ConstantSum };

/**
 * A constant function market maker: trading function kind, reserves and fee.
 *
 * The fee follows the trading-set convention: a trade tendering z1 and
 * receiving z2 is accepted when phi(R + fee * z1 - z2) >= phi(R), so fee = 1
 * is fee-free and fee = 0.997 is a 30bps pool.
 */
struct Market
{
    MarketKind kind = MarketKind::ConstantProduct;
    Eigen::VectorXd reserves;
    Eigen::VectorXd weights; ///< geometric mean only
    double fee = 1.0;

    static Market product(double r0, double r1, double fee = 1.0);
    static Market sum(double r0, double r1, double fee = 1.0);
    static Market geometric_mean(Eigen::VectorXd weights, Eigen::VectorXd reserves, double fee = 1.0);

    Eigen::Index size() const { return reserves.size(); }

    /// Throws InvalidInput unless the market is tradable.
    void validate() const;
};

/// A two-asset trade against a single counterparty: amount tendered, amount received.
struct Trade2
{
    double tendered = 0.0;
    double received = 0.0;
};

/**
 * A limit order seen from the router: the user may tender up to volume/price
 * of `input_asset` and receive up to `volume` of `output_asset` at a price no
 * worse than `price` (output per input). The order carries no fee.
 */
struct LimitOrder
{
    double price = 1.0;
    double volume = 0.0;
    int input_asset = 0;
    int output_asset = 1;

    /// Input needed to exhaust the order.
    double capacity() const { return volume / price; }

    void validate() const;

    /// A maker selling `volume` of `sold_asset` for at least `price` units of
    /// `paid_asset` each, rewritten as the router-side buy set.
    static LimitOrder from_sell(int sold_asset, int paid_asset, double price, double volume);
};

namespace detail {

inline void check_dimension(const Market& m, Eigen::Index n)
{
    if (m.kind == MarketKind::GeometricMean ? n != m.weights.size() : n != 2)
        throw InvalidInput("reserve vector length does not match market kind");
}

} // namespace detail

/// phi(reserves) for the market's kind; reserves need not be the market's own.
template <typename Derived>
typename Derived::Scalar trading_function(const Market& m, const Eigen::MatrixBase<Derived>& reserves)
{
    using Scalar = typename Derived::Scalar;
    detail::check_dimension(m, reserves.size());
    if ((reserves.array() < Scalar(0)).any())
        throw InvalidInput("reserves must be nonnegative");
    switch (m.kind) {
    case MarketKind::ConstantProduct:
        return reserves(0) * reserves(1);
    case MarketKind::ConstantSum:
        return reserves(0) + reserves(1);
    case MarketKind::GeometricMean:
        return reserves.array().pow(m.weights.array().template cast<Scalar>()).prod();
    }
    return Scalar(0);
}

/// Output received for tendering `delta` of asset `in`; capped at the output reserve.
double forward_exchange(const Market& m, Eigen::Index in, Eigen::Index out, double delta);

/// Derivative of forward_exchange with respect to the input size.
double marginal_rate(const Market& m, Eigen::Index in, Eigen::Index out, double delta);

/// Largest input for which marginal_rate is defined (infinite except for constant sum).
double input_domain_limit(const Market& m, Eigen::Index in, Eigen::Index out);

bool limit_order_contains(const LimitOrder& order, const Trade2& t, double tol = 0.0);

/// Best total output obtainable from `orders` for a total input, filling the best price first.
double max_fill_output(std::span<const LimitOrder> orders, double input);

/// Membership in the Minkowski sum of the orders' trading sets.
bool minkowski_contains(std::span<const LimitOrder> orders, const Trade2& t, double tol = 1e-12);

struct Breakpoint
{
    double delta1 = 0.0; ///< input at which the pool's marginal rate falls to the limit price
    double delta2 = 0.0; ///< delta1 + volume / price
    bool activates = true;
};

Breakpoint solve_breakpoint(const Market& m, Eigen::Index in, Eigen::Index out, const LimitOrder& order);

/// A pool's exchange curve with one limit order spliced in at its price.
struct ModifiedExchangeCurve
{
    Market market;
    Eigen::Index input = 0;
    Eigen::Index output = 1;
    LimitOrder order;
    Breakpoint breakpoint;

    static ModifiedExchangeCurve build(Market market, Eigen::Index in, Eigen::Index out, LimitOrder order);
};

double modified_forward_exchange(const ModifiedExchangeCurve& c, double delta);

/// Uniform liquidity of total `volume` spread over [center - halfwidth, center + halfwidth].
struct LiquidityStep
{
    double center = 0.0;
    double halfwidth = 1.0;
    double volume = 0.0;

    double height() const { return volume / (2.0 * halfwidth); }
    double lower() const { return center - halfwidth; }
    double upper() const { return center + halfwidth; }
    double operator()(double p) const { return (p >= lower() && p <= upper()) ? height() : 0.0; }
    double integral() const { return height() * 2.0 * halfwidth; }
};

std::vector<LiquidityStep> liquidity_step_sequence(double price, double volume, std::span<const double> halfwidths);

} // namespace hookroute
