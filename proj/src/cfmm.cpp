#include "hookroute/cfmm.hpp"

#include <algorithm>
#include <numeric>

namespace hookroute {

namespace {

void check_pair(const Market& m, Eigen::Index in, Eigen::Index out)
{
    if (in < 0 || out < 0 || in >= m.size() || out >= m.size())
        throw InvalidInput("asset index outside market");
    if (in == out)
        throw InvalidInput("input and output asset must differ");
}

// Remaining output reserve r solving
//   w_in log(R_in + fee*delta) + w_out log(r) = w_in log(R_in) + w_out log(R_out)
// by bisection on log(r); the residual is monotone increasing in r.
double geometric_remaining_reserve(const Market& m, Eigen::Index in, Eigen::Index out, double delta)
{
    const double w_in = m.weights(in);
    const double w_out = m.weights(out);
    const double r_in = m.reserves(in);
    const double r_out = m.reserves(out);
    const double lhs_shift = w_in * std::log1p(m.fee * delta / r_in);
    auto residual = [&](double log_r) { return lhs_shift + w_out * (log_r - std::log(r_out)); };

    double hi = std::log(r_out);
    double lo = hi - 1.0;
    while (residual(lo) > 0.0)
        lo = hi - 2.0 * (hi - lo);

    for (int iter = 0; iter < 400; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        if (residual(mid) > 0.0)
            hi = mid;
        else
            lo = mid;
        if (hi - lo <= 1e-13)
            break;
    }
    return std::exp(0.5 * (lo + hi));
}

} // namespace

Market Market::product(double r0, double r1, double fee)
{
    Market m;
    m.kind = MarketKind::ConstantProduct;
    m.reserves = Eigen::Vector2d(r0, r1);
    m.fee = fee;
    return m;
}

Market Market::sum(double r0, double r1, double fee)
{
    Market m;
    m.kind = MarketKind::ConstantSum;
    m.reserves = Eigen::Vector2d(r0, r1);
    m.fee = fee;
    return m;
}

Market Market::geometric_mean(Eigen::VectorXd weights, Eigen::VectorXd reserves, double fee)
{
    Market m;
    m.kind = MarketKind::GeometricMean;
    m.weights = std::move(weights);
    m.reserves = std::move(reserves);
    m.fee = fee;
    return m;
}

void Market::validate() const
{
    detail::check_dimension(*this, reserves.size());
    if (reserves.size() < 2)
        throw InvalidInput("a market needs at least two assets");
    if (!(reserves.array() > 0.0).all() || !reserves.allFinite())
        throw InvalidInput("reserves must be strictly positive");
    if (kind == MarketKind::GeometricMean && (!(weights.array() > 0.0).all() || !weights.allFinite()))
        throw InvalidInput("geometric mean weights must be strictly positive");
    if (!(fee > 0.0 && fee <= 1.0))
        throw InvalidInput("fee must lie in (0, 1]");
}

void LimitOrder::validate() const
{
    if (!(price > 0.0) || !std::isfinite(price))
        throw InvalidInput("limit price must be positive");
    if (!(volume >= 0.0) || !std::isfinite(volume))
        throw InvalidInput("limit volume must be nonnegative");
    if (input_asset < 0 || output_asset < 0)
        throw InvalidInput("asset ids must be nonnegative");
    if (input_asset == output_asset)
        throw InvalidInput("limit order input and output asset must differ");
}

LimitOrder LimitOrder::from_sell(int sold_asset, int paid_asset, double price, double volume)
{
    LimitOrder o;
    o.input_asset = paid_asset;
    o.output_asset = sold_asset;
    o.price = 1.0 / price;
    o.volume = volume;
    return o;
}

double input_domain_limit(const Market& m, Eigen::Index in, Eigen::Index out)
{
    check_pair(m, in, out);
    if (m.kind == MarketKind::ConstantSum)
        return m.reserves(out) / m.fee;
    return std::numeric_limits<double>::infinity();
}

double forward_exchange(const Market& m, Eigen::Index in, Eigen::Index out, double delta)
{
    check_pair(m, in, out);
    if (!(delta >= 0.0))
        throw InvalidInput("trade size must be nonnegative");
    if (delta == 0.0)
        return 0.0;
    const double r_in = m.reserves(in);
    const double r_out = m.reserves(out);
    switch (m.kind) {
    case MarketKind::ConstantProduct:
        if (std::isinf(delta))
            return r_out;
        return m.fee * r_out * delta / (r_in + m.fee * delta);
    case MarketKind::ConstantSum:
        return std::min(m.fee * delta, r_out);
    case MarketKind::GeometricMean:
        if (std::isinf(delta))
            return r_out;
        return std::max(0.0, r_out - geometric_remaining_reserve(m, in, out, delta));
    }
    return 0.0;
}

double marginal_rate(const Market& m, Eigen::Index in, Eigen::Index out, double delta)
{
    check_pair(m, in, out);
    if (!(delta >= 0.0))
        throw InvalidInput("trade size must be nonnegative");
    const double r_in = m.reserves(in);
    const double r_out = m.reserves(out);
    switch (m.kind) {
    case MarketKind::ConstantProduct: {
        const double denom = r_in + m.fee * delta;
        return m.fee * r_in * r_out / (denom * denom);
    }
    case MarketKind::ConstantSum:
        if (delta > input_domain_limit(m, in, out))
            throw DomainError("constant-sum market exhausted; marginal rate undefined");
        return m.fee;
    case MarketKind::GeometricMean: {
        const double received = forward_exchange(m, in, out, delta);
        return m.fee * m.weights(in) * (r_out - received) / (m.weights(out) * (r_in + m.fee * delta));
    }
    }
    return 0.0;
}

bool limit_order_contains(const LimitOrder& order, const Trade2& t, double tol)
{
    return t.tendered >= -tol && t.received >= -tol && order.price * t.tendered - t.received >= -tol &&
           t.received <= order.volume + tol;
}

double max_fill_output(std::span<const LimitOrder> orders, double input)
{
    std::vector<std::size_t> idx(orders.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return orders[a].price > orders[b].price; });
    double remaining = std::max(input, 0.0);
    double out = 0.0;
    for (std::size_t j : idx) {
        if (remaining <= 0.0)
            break;
        const double take = std::min(remaining, orders[j].capacity());
        out += take * orders[j].price;
        remaining -= take;
    }
    return out;
}

bool minkowski_contains(std::span<const LimitOrder> orders, const Trade2& t, double tol)
{
    for (const auto& o : orders) {
        o.validate();
        if (o.input_asset != orders.front().input_asset || o.output_asset != orders.front().output_asset)
            throw InvalidInput("Minkowski composition needs orders on one asset pair");
    }
    if (t.tendered < -tol || t.received < -tol)
        return false;
    return t.received <= max_fill_output(orders, std::max(t.tendered, 0.0)) + tol;
}

Breakpoint solve_breakpoint(const Market& m, Eigen::Index in, Eigen::Index out, const LimitOrder& order)
{
    m.validate();
    order.validate();
    Breakpoint bp;
    const double p0 = order.price;
    if (marginal_rate(m, in, out, 0.0) <= p0) {
        bp.delta1 = 0.0;
    } else if (m.kind == MarketKind::ConstantSum) {
        // constant rate above the limit price on its whole domain
        bp.activates = false;
        bp.delta1 = std::numeric_limits<double>::infinity();
        bp.delta2 = bp.delta1;
        return bp;
    } else {
        double lo = 0.0;
        double hi = std::max(m.reserves(in), 1e-12);
        while (marginal_rate(m, in, out, hi) > p0) {
            lo = hi;
            hi *= 2.0;
            if (!std::isfinite(hi))
                throw DomainError("marginal rate never reaches the limit price");
        }
        for (int iter = 0; iter < 300 && hi - lo > 1e-13 * hi; ++iter) {
            const double mid = 0.5 * (lo + hi);
            (marginal_rate(m, in, out, mid) > p0 ? lo : hi) = mid;
        }
        bp.delta1 = 0.5 * (lo + hi);
    }
    bp.delta2 = bp.delta1 + order.capacity();
    return bp;
}

ModifiedExchangeCurve ModifiedExchangeCurve::build(Market market, Eigen::Index in, Eigen::Index out, LimitOrder order)
{
    ModifiedExchangeCurve c;
    c.breakpoint = solve_breakpoint(market, in, out, order);
    c.market = std::move(market);
    c.input = in;
    c.output = out;
    c.order = order;
    return c;
}

double modified_forward_exchange(const ModifiedExchangeCurve& c, double delta)
{
    if (!(delta >= 0.0))
        throw InvalidInput("trade size must be nonnegative");
    const auto& bp = c.breakpoint;
    if (!bp.activates || delta <= bp.delta1)
        return forward_exchange(c.market, c.input, c.output, delta);
    if (delta < bp.delta2)
        return forward_exchange(c.market, c.input, c.output, bp.delta1) + c.order.price * (delta - bp.delta1);
    const double span = bp.delta2 - bp.delta1;
    return forward_exchange(c.market, c.input, c.output, delta - span) + c.order.price * span;
}

std::vector<LiquidityStep> liquidity_step_sequence(double price, double volume, std::span<const double> halfwidths)
{
    if (!(price > 0.0) || !(volume >= 0.0))
        throw InvalidInput("liquidity step needs a positive price and nonnegative volume");
    std::vector<LiquidityStep> steps;
    steps.reserve(halfwidths.size());
    for (double eps : halfwidths) {
        if (!(eps > 0.0))
            throw InvalidInput("halfwidths must be positive");
        steps.push_back({price, eps, volume});
    }
    return steps;
}

} // namespace hookroute
