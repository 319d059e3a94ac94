#include "hookroute/routing.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

namespace hookroute {

// ---------------------------------------------------------------------------
// Problem helpers
// ---------------------------------------------------------------------------

void RoutingProblem::validate() const
{
    if (n_assets < 2)
        throw InvalidInput("routing problem needs at least two assets");
    auto check_asset = [&](int a, const char* what) {
        if (a < 0 || a >= n_assets)
            throw InvalidInput(std::string(what) + " refers to an unknown asset");
    };
    for (const auto& link : markets) {
        link.market.validate();
        if (static_cast<Eigen::Index>(link.assets.size()) != link.market.size())
            throw InvalidInput("market asset map length differs from its reserve count");
        for (std::size_t i = 0; i < link.assets.size(); ++i) {
            check_asset(link.assets[i], "market asset map");
            for (std::size_t j = 0; j < i; ++j)
                if (link.assets[i] == link.assets[j])
                    throw InvalidInput("market asset map repeats a global asset");
        }
    }
    for (const auto& o : orders) {
        o.validate();
        check_asset(o.input_asset, "limit order");
        check_asset(o.output_asset, "limit order");
    }
    check_asset(utility.input, "utility input");
    check_asset(utility.output, "utility output");
    if (utility.input == utility.output)
        throw InvalidInput("liquidation input and output must differ");
    if (!(utility.budget >= 0.0) || !std::isfinite(utility.budget))
        throw InvalidInput("budget must be nonnegative");
}

RoutingProblem RoutingProblem::with_budget(double budget) const
{
    RoutingProblem p = *this;
    p.utility.budget = budget;
    return p;
}

RoutingProblem RoutingProblem::without_orders() const
{
    RoutingProblem p = *this;
    p.orders.clear();
    return p;
}

Eigen::VectorXd RoutingProblem::initial_holdings() const
{
    Eigen::VectorXd h = Eigen::VectorXd::Zero(n_assets);
    h(utility.input) = utility.budget;
    return h;
}

// ---------------------------------------------------------------------------
// Subproblems
// ---------------------------------------------------------------------------

namespace {

MarketTrade zero_trade(Eigen::Index n)
{
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
}

Eigen::VectorXd local_prices(const Market& m, std::span<const int> assets, const DualPrices& prices)
{
    if (static_cast<Eigen::Index>(assets.size()) != m.size())
        throw InvalidInput("asset map length differs from the market size");
    Eigen::VectorXd nu(m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const int g = assets[static_cast<std::size_t>(i)];
        if (g < 0 || g >= prices.nu.size())
            throw InvalidInput("asset map refers to an unpriced asset");
        nu(i) = prices.nu(g);
    }
    if (!(nu.array() > 0.0).all() || !nu.allFinite())
        throw InvalidInput("prices must be strictly positive");
    return nu;
}

ArbitrageResult product_arbitrage(const Market& m, const Eigen::VectorXd& nu)
{
    auto trade = zero_trade(2);
    const double fee = m.fee;
    for (int in : {0, 1}) {
        const int out = 1 - in;
        const double r_in = m.reserves(in);
        const double r_out = m.reserves(out);
        if (nu(out) * fee * r_out > nu(in) * r_in) {
            const double delta = (std::sqrt(fee * r_in * r_out * nu(out) / nu(in)) - r_in) / fee;
            const double received = forward_exchange(m, in, out, delta);
            trade.tendered(in) = delta;
            trade.received(out) = received;
            return {trade, nu(out) * received - nu(in) * delta};
        }
    }
    return {trade, 0.0};
}

// New reserves are clamp(R_i, fee*k*w_i/nu_i, k*w_i/nu_i) for the multiplier k
// at which the invariant binds; the invariant is monotone in k.
ArbitrageResult geometric_arbitrage(const Market& m, const Eigen::VectorXd& nu)
{
    const Eigen::Index n = m.size();
    const Eigen::ArrayXd scale = m.weights.array() / nu.array();
    const Eigen::ArrayXd base = m.reserves.array();
    const double log_phi = (m.weights.array() * base.log()).sum();

    Eigen::ArrayXd r_new(n);
    auto reserves_at = [&](double log_k) {
        const double k = std::exp(log_k);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double hi = k * scale(i);
            r_new(i) = std::clamp(base(i), m.fee * hi, hi);
        }
        return (m.weights.array() * r_new.log()).sum() - log_phi;
    };

    double lo = std::log((base / scale).minCoeff());
    double hi = std::log((base / scale).maxCoeff() / m.fee);
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        (reserves_at(mid) >= 0.0 ? hi : lo) = mid;
    }
    reserves_at(hi);

    auto trade = zero_trade(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (r_new(i) < base(i))
            trade.received(i) = base(i) - r_new(i);
        else if (r_new(i) > base(i))
            trade.tendered(i) = (r_new(i) - base(i)) / m.fee;
    }
    return {trade, nu.dot(trade.net())};
}

ArbitrageResult sum_arbitrage(const Market& m, const Eigen::VectorXd& nu)
{
    auto trade = zero_trade(2);
    for (int in : {0, 1}) {
        const int out = 1 - in;
        if (m.fee * nu(out) > nu(in)) {
            const double cap = m.reserves(out) / m.fee;
            trade.tendered(in) = cap;
            trade.received(out) = m.reserves(out);
            return {trade, nu(out) * m.reserves(out) - nu(in) * cap};
        }
    }
    return {trade, 0.0};
}

} // namespace

ArbitrageResult arbitrage_subproblem(const Market& m, std::span<const int> assets, const DualPrices& prices)
{
    m.validate();
    const Eigen::VectorXd nu = local_prices(m, assets, prices);
    switch (m.kind) {
    case MarketKind::ConstantProduct:
        return product_arbitrage(m, nu);
    case MarketKind::GeometricMean:
        return geometric_arbitrage(m, nu);
    case MarketKind::ConstantSum:
        return sum_arbitrage(m, nu);
    }
    return {};
}

OrderArbitrageResult limit_order_subproblem(const LimitOrder& order, const DualPrices& prices)
{
    order.validate();
    if (order.input_asset >= prices.nu.size() || order.output_asset >= prices.nu.size())
        throw InvalidInput("limit order refers to an unpriced asset");
    const double nu_in = prices.nu(order.input_asset);
    const double nu_out = prices.nu(order.output_asset);
    if (!(nu_in > 0.0) || !(nu_out > 0.0))
        throw InvalidInput("prices must be strictly positive");
    if (nu_out * order.price < nu_in)
        return {};
    const Trade2 fill{order.capacity(), order.volume};
    return {fill, nu_out * fill.received - nu_in * fill.tendered};
}

// ---------------------------------------------------------------------------
// Dual decomposition
// ---------------------------------------------------------------------------

namespace {

// A piecewise-linear leg: up to `cap` of `from` converted at `rate` into `to`.
// Limit orders and each direction of a constant-sum market are linear legs.
struct LinearLeg
{
    int from = 0;
    int to = 1;
    double rate = 1.0;
    double cap = 0.0;
    double smoothing_unit = 1.0; // margin at which the smoothed fill saturates, per unit kappa
    int order = -1;              // index into problem.orders, or -1
    int market = -1;             // index into problem.markets for constant-sum legs
    int local_from = 0;
    int local_to = 1;
};

class DualModel
{
public:
    explicit DualModel(const RoutingProblem& p) : problem_(p), h_(p.initial_holdings())
    {
        for (int i = 0; i < static_cast<int>(p.markets.size()); ++i) {
            const auto& link = p.markets[static_cast<std::size_t>(i)];
            if (link.market.kind != MarketKind::ConstantSum) {
                curved_.push_back(i);
                continue;
            }
            for (int in : {0, 1}) {
                LinearLeg leg;
                leg.local_from = in;
                leg.local_to = 1 - in;
                leg.from = link.assets[static_cast<std::size_t>(in)];
                leg.to = link.assets[static_cast<std::size_t>(1 - in)];
                leg.rate = link.market.fee;
                leg.cap = link.market.reserves(1 - in) / link.market.fee;
                leg.market = i;
                linear_.push_back(leg);
            }
        }
        for (int j = 0; j < static_cast<int>(p.orders.size()); ++j) {
            const auto& o = p.orders[static_cast<std::size_t>(j)];
            LinearLeg leg;
            leg.from = o.input_asset;
            leg.to = o.output_asset;
            leg.rate = o.price;
            leg.cap = o.capacity();
            leg.order = j;
            linear_.push_back(leg);
        }
    }

    // Fee-free spot prices propagated outward from the numeraire.
    Eigen::VectorXd initial_prices() const
    {
        const int n = problem_.n_assets;
        Eigen::VectorXd nu = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
        nu(problem_.utility.output) = 1.0;
        for (bool changed = true; changed;) {
            changed = false;
            for (const auto& link : problem_.markets) {
                const auto& m = link.market;
                for (Eigen::Index j = 0; j < m.size(); ++j) {
                    const double nu_j = nu(link.assets[static_cast<std::size_t>(j)]);
                    if (std::isnan(nu_j))
                        continue;
                    for (Eigen::Index i = 0; i < m.size(); ++i) {
                        double& nu_i = nu(link.assets[static_cast<std::size_t>(i)]);
                        if (!std::isnan(nu_i))
                            continue;
                        nu_i = nu_j * spot_price(m, i, j);
                        changed = true;
                    }
                }
            }
            for (const auto& o : problem_.orders) {
                if (!std::isnan(nu(o.output_asset)) && std::isnan(nu(o.input_asset))) {
                    nu(o.input_asset) = o.price * nu(o.output_asset);
                    changed = true;
                } else if (!std::isnan(nu(o.input_asset)) && std::isnan(nu(o.output_asset))) {
                    nu(o.output_asset) = nu(o.input_asset) / o.price;
                    changed = true;
                }
            }
        }
        for (Eigen::Index k = 0; k < n; ++k)
            if (std::isnan(nu(k)))
                nu(k) = 1.0;
        return nu;
    }

    void set_reference_prices(const Eigen::VectorXd& nu)
    {
        for (auto& leg : linear_)
            leg.smoothing_unit = leg.rate * nu(leg.to);
    }

    // Dual function at nu. kappa > 0 smooths the linear legs with a quadratic
    // penalty on their fill; kappa == 0 is the exact dual. `fixed_fills`
    // overrides the linear-leg fills used for the gradient and trades.
    double evaluate(const Eigen::VectorXd& nu, double kappa, Eigen::VectorXd* grad,
                    std::vector<MarketTrade>* market_trades = nullptr, std::vector<Trade2>* order_trades = nullptr,
                    const std::vector<double>* fixed_fills = nullptr, std::vector<double>* fills_out = nullptr) const
    {
        if (fills_out)
            fills_out->clear();
        double value = h_.dot(nu);
        if (grad)
            *grad = h_;
        if (market_trades) {
            market_trades->clear();
            for (const auto& link : problem_.markets)
                market_trades->push_back(zero_trade(link.market.size()));
        }
        if (order_trades)
            order_trades->assign(problem_.orders.size(), Trade2{});

        const DualPrices prices{nu};
        for (int i : curved_) {
            const auto& link = problem_.markets[static_cast<std::size_t>(i)];
            auto arb = arbitrage_subproblem(link.market, link.assets, prices);
            value += arb.value;
            const Eigen::VectorXd net = arb.trade.net();
            if (grad)
                for (Eigen::Index a = 0; a < net.size(); ++a)
                    (*grad)(link.assets[static_cast<std::size_t>(a)]) += net(a);
            if (market_trades)
                (*market_trades)[static_cast<std::size_t>(i)] = std::move(arb.trade);
        }
        for (std::size_t l = 0; l < linear_.size(); ++l) {
            const auto& leg = linear_[l];
            const double margin = nu(leg.to) * leg.rate - nu(leg.from);
            double fill = 0.0;
            if (kappa > 0.0) {
                const double c = kappa * leg.smoothing_unit;
                fill = std::clamp(margin / c, 0.0, 1.0);
                value += leg.cap * (margin * fill - 0.5 * c * fill * fill);
            } else {
                const bool take = leg.order >= 0 ? margin >= 0.0 : margin > 0.0;
                fill = take ? 1.0 : 0.0;
                value += leg.cap * fill * margin;
            }
            if (fixed_fills)
                fill = (*fixed_fills)[l];
            if (fills_out)
                fills_out->push_back(fill);
            if (fill == 0.0)
                continue;
            const double tendered = leg.cap * fill;
            const double received = leg.order >= 0 ? problem_.orders[static_cast<std::size_t>(leg.order)].volume * fill
                                                   : tendered * leg.rate;
            if (grad) {
                (*grad)(leg.to) += received;
                (*grad)(leg.from) -= tendered;
            }
            if (order_trades && leg.order >= 0)
                (*order_trades)[static_cast<std::size_t>(leg.order)] = {tendered, received};
            if (market_trades && leg.market >= 0) {
                auto& t = (*market_trades)[static_cast<std::size_t>(leg.market)];
                t.tendered(leg.local_from) += tendered;
                t.received(leg.local_to) += received;
            }
        }
        return value;
    }

    // Newton refinement of the optimality conditions at fixed active set: the
    // balances of the priced assets vanish and every partially filled linear
    // leg sits on its kink. Updates nu and fills; false if nothing improved.
    bool polish(Eigen::VectorXd& nu, std::vector<double>& fills, double kappa) const
    {
        evaluate(nu, kappa, nullptr, nullptr, nullptr, nullptr, &fills);
        std::vector<std::size_t> active;
        for (std::size_t l = 0; l < fills.size(); ++l)
            if (fills[l] > 0.0 && fills[l] < 1.0)
                active.push_back(l);
        std::vector<int> free;
        for (int k = 0; k < problem_.n_assets; ++k)
            if (k != problem_.utility.output)
                free.push_back(k);
        const auto nf = static_cast<Eigen::Index>(free.size());
        const auto na = static_cast<Eigen::Index>(active.size());
        const double scale = 1.0 + problem_.utility.budget;

        auto unpack = [&](const Eigen::VectorXd& y, Eigen::VectorXd& x_nu, std::vector<double>& f) {
            x_nu = nu;
            for (Eigen::Index i = 0; i < nf; ++i)
                x_nu(free[static_cast<std::size_t>(i)]) = std::exp(y(i));
            f = fills;
            for (Eigen::Index a = 0; a < na; ++a)
                f[active[static_cast<std::size_t>(a)]] = y(nf + a);
        };
        auto residual = [&](const Eigen::VectorXd& y) {
            Eigen::VectorXd x_nu, bal;
            std::vector<double> f;
            unpack(y, x_nu, f);
            evaluate(x_nu, 0.0, &bal, nullptr, nullptr, &f);
            Eigen::VectorXd r(nf + na);
            for (Eigen::Index i = 0; i < nf; ++i)
                r(i) = bal(free[static_cast<std::size_t>(i)]);
            for (Eigen::Index a = 0; a < na; ++a) {
                const auto& leg = linear_[active[static_cast<std::size_t>(a)]];
                r(nf + a) = scale * (x_nu(leg.to) * leg.rate / x_nu(leg.from) - 1.0);
            }
            return r;
        };

        Eigen::VectorXd y(nf + na);
        for (Eigen::Index i = 0; i < nf; ++i)
            y(i) = std::log(nu(free[static_cast<std::size_t>(i)]));
        for (Eigen::Index a = 0; a < na; ++a)
            y(nf + a) = fills[active[static_cast<std::size_t>(a)]];

        Eigen::VectorXd r = residual(y);
        const double start = r.norm();
        for (int iter = 0; iter < 20 && r.lpNorm<Eigen::Infinity>() > 1e-14 * scale; ++iter) {
            Eigen::MatrixXd jac(nf + na, nf + na);
            for (Eigen::Index c = 0; c < nf + na; ++c) {
                const double h = c < nf ? 1e-7 : 1e-6;
                Eigen::VectorXd up = y, down = y;
                up(c) += h;
                down(c) -= h;
                jac.col(c) = (residual(up) - residual(down)) / (2.0 * h);
            }
            const Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(-r);
            bool moved = false;
            for (double t = 1.0; t > 1e-3; t *= 0.5) {
                Eigen::VectorXd trial = y + t * step;
                for (Eigen::Index a = 0; a < na; ++a)
                    trial(nf + a) = std::clamp(trial(nf + a), 0.0, 1.0);
                const Eigen::VectorXd rt = residual(trial);
                if (rt.allFinite() && rt.norm() < r.norm()) {
                    y = trial;
                    r = rt;
                    moved = true;
                    break;
                }
            }
            if (!moved)
                break;
        }
        if (!(r.norm() < start))
            return false;
        unpack(y, nu, fills);
        return true;
    }

    // nu moved onto the kinks of the partially filled linear legs, where the
    // exact dual bottoms out.
    Eigen::VectorXd snapped(const Eigen::VectorXd& nu, double kappa) const
    {
        std::vector<double> fills;
        evaluate(nu, kappa, nullptr, nullptr, nullptr, nullptr, &fills);
        Eigen::VectorXd out = nu;
        const int numeraire = problem_.utility.output;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t l = 0; l < linear_.size(); ++l) {
                if (!(fills[l] > 0.0 && fills[l] < 1.0))
                    continue;
                const auto& leg = linear_[l];
                if (leg.from != numeraire)
                    out(leg.from) = out(leg.to) * leg.rate;
                else if (leg.to != numeraire)
                    out(leg.to) = out(leg.from) / leg.rate;
            }
        }
        return out;
    }

    // Trades at nu with the fractional linear fills re-solved (least squares)
    // so that the balances of the priced assets close; the smoothed fills are
    // only as accurate as the prices.
    void repaired_trades(const Eigen::VectorXd& nu, double kappa, std::vector<MarketTrade>& market_trades,
                         std::vector<Trade2>& order_trades) const
    {
        std::vector<double> fills;
        evaluate(nu, kappa, nullptr, &market_trades, &order_trades, nullptr, &fills);
        std::vector<std::size_t> active;
        for (std::size_t l = 0; l < fills.size(); ++l)
            if (fills[l] > 0.0 && fills[l] < 1.0)
                active.push_back(l);
        if (active.empty())
            return;
        std::vector<bool> touched(static_cast<std::size_t>(problem_.n_assets), false);
        for (std::size_t l : active)
            touched[static_cast<std::size_t>(linear_[l].from)] = touched[static_cast<std::size_t>(linear_[l].to)] = true;
        for (int round = 0; round < 3; ++round) {
            Eigen::VectorXd balance;
            evaluate(nu, kappa, &balance, nullptr, nullptr, &fills);
            std::vector<int> rows;
            for (int k = 0; k < problem_.n_assets; ++k)
                if (k != problem_.utility.output && (balance(k) < 0.0 || touched[static_cast<std::size_t>(k)]))
                    rows.push_back(k);
            if (rows.empty())
                break;
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(active.size()));
            Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                rhs(static_cast<Eigen::Index>(r)) = -balance(rows[r]);
                for (std::size_t c = 0; c < active.size(); ++c) {
                    const auto& leg = linear_[active[c]];
                    const double per_fill = leg.order >= 0 ? problem_.orders[static_cast<std::size_t>(leg.order)].volume
                                                           : leg.cap * leg.rate;
                    if (leg.to == rows[r])
                        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) += per_fill;
                    if (leg.from == rows[r])
                        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) -= leg.cap;
                }
            }
            const Eigen::VectorXd step = m.completeOrthogonalDecomposition().solve(rhs);
            for (std::size_t c = 0; c < active.size(); ++c)
                fills[active[c]] = std::clamp(fills[active[c]] + step(static_cast<Eigen::Index>(c)), 0.0, 1.0);
        }
        evaluate(nu, kappa, nullptr, &market_trades, &order_trades, &fills);
    }

private:
    static double spot_price(const Market& m, Eigen::Index i, Eigen::Index j)
    {
        switch (m.kind) {
        case MarketKind::ConstantProduct:
            return m.reserves(j) / m.reserves(i);
        case MarketKind::GeometricMean:
            return (m.weights(i) / m.reserves(i)) / (m.weights(j) / m.reserves(j));
        case MarketKind::ConstantSum:
            return 1.0;
        }
        return 1.0;
    }

    const RoutingProblem& problem_;
    Eigen::VectorXd h_;
    std::vector<int> curved_;
    std::vector<LinearLeg> linear_;
};

bool output_reachable(const RoutingProblem& p)
{
    const int n = p.n_assets;
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const auto& link : p.markets)
        for (int a : link.assets)
            for (int b : link.assets)
                if (a != b)
                    adj[static_cast<std::size_t>(a)].push_back(b);
    for (const auto& o : p.orders)
        adj[static_cast<std::size_t>(o.input_asset)].push_back(o.output_asset);

    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::deque<int> queue{p.utility.input};
    seen[static_cast<std::size_t>(p.utility.input)] = true;
    while (!queue.empty()) {
        const int a = queue.front();
        queue.pop_front();
        for (int b : adj[static_cast<std::size_t>(a)])
            if (!seen[static_cast<std::size_t>(b)]) {
                seen[static_cast<std::size_t>(b)] = true;
                queue.push_back(b);
            }
    }
    return seen[static_cast<std::size_t>(p.utility.output)];
}

// Quasi-Newton (BFGS) descent on the smoothed dual in log-price coordinates.
// The output asset's price is pinned at one; returns iterations used.
int minimize_smoothed_dual(const DualModel& model, Eigen::VectorXd& nu, const std::vector<int>& free, double kappa,
                           int max_iter, double balance_tol)
{
    const auto d = static_cast<Eigen::Index>(free.size());
    if (d == 0 || max_iter <= 0)
        return 0;

    Eigen::VectorXd grad_nu;
    auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        Eigen::VectorXd trial = nu;
        for (Eigen::Index k = 0; k < d; ++k)
            trial(free[static_cast<std::size_t>(k)]) = std::exp(x(k));
        const double f = model.evaluate(trial, kappa, &grad_nu);
        g.resize(d);
        for (Eigen::Index k = 0; k < d; ++k)
            g(k) = trial(free[static_cast<std::size_t>(k)]) * grad_nu(free[static_cast<std::size_t>(k)]);
        return f;
    };

    Eigen::VectorXd x(d);
    for (Eigen::Index k = 0; k < d; ++k)
        x(k) = std::log(nu(free[static_cast<std::size_t>(k)]));
    Eigen::VectorXd g;
    double f = eval(x, g);
    Eigen::VectorXd balance = grad_nu;

    auto converged = [&] {
        const double value_tol = 1e-14 * (1.0 + std::abs(f));
        for (Eigen::Index k = 0; k < d; ++k) {
            const double r = balance(free[static_cast<std::size_t>(k)]);
            if (std::abs(r) <= balance_tol)
                continue;
            if (r > 0.0 && std::exp(x(k)) * r <= value_tol)
                continue;
            return false;
        }
        return true;
    };

    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    auto reset = [&] { return eye / std::max(1.0, g.lpNorm<Eigen::Infinity>()); };
    Eigen::MatrixXd h_inv = reset();
    bool fresh = true;
    int stalled = 0;
    int it = 0;
    for (; it < max_iter && stalled < 3; ++it) {
        if (converged())
            break;
        Eigen::VectorXd dir = -h_inv * g;
        if (dir.dot(g) >= 0.0) {
            h_inv = reset();
            fresh = true;
            dir = -h_inv * g;
        }
        const double longest = dir.lpNorm<Eigen::Infinity>();
        if (longest > 2.0)
            dir *= 2.0 / longest;

        const double slope = g.dot(dir);
        double step = 1.0;
        Eigen::VectorXd x_new, g_new;
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 80; ++ls) {
            x_new = x + step * dir;
            f_new = eval(x_new, g_new);
            if (f_new <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (fresh)
                break;
            h_inv = reset();
            fresh = true;
            continue;
        }

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        // below double resolution of the prices there is nothing left to gain
        stalled = (s.lpNorm<Eigen::Infinity>() <= 1e-15 || f - f_new <= 1e-15 * std::abs(f)) ? stalled + 1 : 0;
        x = x_new;
        g = g_new;
        f = f_new;
        balance = grad_nu;

        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
            if (fresh) {
                h_inv = eye * (sy / y.squaredNorm());
                fresh = false;
            }
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd left = eye - rho * s * y.transpose();
            h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
        }
    }
    for (Eigen::Index k = 0; k < d; ++k)
        nu(free[static_cast<std::size_t>(k)]) = std::exp(x(k));
    return it;
}

Eigen::VectorXd assemble_psi(const RoutingProblem& p, const std::vector<MarketTrade>& market_trades,
                             const std::vector<Trade2>& order_trades)
{
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(p.n_assets);
    for (std::size_t i = 0; i < p.markets.size(); ++i) {
        const Eigen::VectorXd net = market_trades[i].net();
        for (Eigen::Index a = 0; a < net.size(); ++a)
            psi(p.markets[i].assets[static_cast<std::size_t>(a)]) += net(a);
    }
    for (std::size_t j = 0; j < p.orders.size(); ++j) {
        psi(p.orders[j].input_asset) -= order_trades[j].tendered;
        psi(p.orders[j].output_asset) += order_trades[j].received;
    }
    return psi;
}

// Shrinks trades that overdraw an asset until psi + h_init >= 0 off the
// output coordinate. Scaling toward zero keeps each trade in its convex set.
void project_feasible(const RoutingProblem& p, std::vector<MarketTrade>& market_trades, std::vector<Trade2>& order_trades)
{
    const Eigen::VectorXd h = p.initial_holdings();
    for (int pass = 0; pass < 100; ++pass) {
        const Eigen::VectorXd bal = h + assemble_psi(p, market_trades, order_trades);
        int worst = -1;
        double deficit = 0.0;
        for (int k = 0; k < p.n_assets; ++k)
            if (k != p.utility.output && -bal(k) > deficit) {
                deficit = -bal(k);
                worst = k;
            }
        if (worst < 0)
            return;

        double outflow = 0.0;
        for (std::size_t i = 0; i < p.markets.size(); ++i)
            for (std::size_t a = 0; a < p.markets[i].assets.size(); ++a)
                if (p.markets[i].assets[a] == worst)
                    outflow += market_trades[i].tendered(static_cast<Eigen::Index>(a));
        for (std::size_t j = 0; j < p.orders.size(); ++j)
            if (p.orders[j].input_asset == worst)
                outflow += order_trades[j].tendered;
        if (!(outflow > 0.0))
            return;
        const double theta = std::max(0.0, 1.0 - deficit * (1.0 + 1e-12) / outflow);

        for (std::size_t i = 0; i < p.markets.size(); ++i) {
            bool touches = false;
            for (std::size_t a = 0; a < p.markets[i].assets.size(); ++a)
                touches |= p.markets[i].assets[a] == worst && market_trades[i].tendered(static_cast<Eigen::Index>(a)) > 0.0;
            if (touches) {
                market_trades[i].tendered *= theta;
                market_trades[i].received *= theta;
            }
        }
        for (std::size_t j = 0; j < p.orders.size(); ++j)
            if (p.orders[j].input_asset == worst && order_trades[j].tendered > 0.0) {
                order_trades[j].tendered *= theta;
                order_trades[j].received *= theta;
            }
    }
}

} // namespace

RoutingSolution solve_routing(const RoutingProblem& problem, const SolverOptions& options)
{
    problem.validate();
    if (!output_reachable(problem))
        throw NoFeasibleRoute("no route from asset " + std::to_string(problem.utility.input) + " to asset " +
                              std::to_string(problem.utility.output));

    DualModel model(problem);
    const Eigen::VectorXd reference = model.initial_prices();
    model.set_reference_prices(reference);

    Eigen::VectorXd nu = reference;
    if (options.warm_start && options.warm_start->nu.size() == problem.n_assets &&
        (options.warm_start->nu.array() > 0.0).all())
        nu = options.warm_start->nu / options.warm_start->nu(problem.utility.output);
    nu(problem.utility.output) = 1.0;

    std::vector<int> free;
    for (int k = 0; k < problem.n_assets; ++k)
        if (k != problem.utility.output)
            free.push_back(k);

    const double scale = 1.0 + problem.utility.budget;
    constexpr double final_kappa = 1e-9;
    int iterations = 0;
    for (double kappa = 1e-2; kappa >= final_kappa * 0.5; kappa *= 0.1) {
        const double balance_tol = std::max(1e-11, 1e-3 * kappa) * scale;
        iterations += minimize_smoothed_dual(model, nu, free, kappa, options.max_iter - iterations, balance_tol);
    }

    RoutingSolution sol;
    model.evaluate(nu, final_kappa, nullptr, &sol.market_trades, &sol.order_trades);
    project_feasible(problem, sol.market_trades, sol.order_trades);
    sol.psi = assemble_psi(problem, sol.market_trades, sol.order_trades);
    sol.utility_value = sol.psi(problem.utility.output);

    std::vector<MarketTrade> repaired_markets;
    std::vector<Trade2> repaired_orders;
    model.repaired_trades(nu, final_kappa, repaired_markets, repaired_orders);
    project_feasible(problem, repaired_markets, repaired_orders);
    const Eigen::VectorXd repaired_psi = assemble_psi(problem, repaired_markets, repaired_orders);
    if (repaired_psi(problem.utility.output) > sol.utility_value) {
        sol.market_trades = std::move(repaired_markets);
        sol.order_trades = std::move(repaired_orders);
        sol.psi = repaired_psi;
        sol.utility_value = repaired_psi(problem.utility.output);
    }
    sol.prices.nu = nu;
    sol.iterations = iterations;

    Eigen::VectorXd polished = nu;
    std::vector<double> polished_fills;
    if (model.polish(polished, polished_fills, final_kappa)) {
        std::vector<MarketTrade> markets;
        std::vector<Trade2> orders;
        model.evaluate(polished, 0.0, nullptr, &markets, &orders, &polished_fills);
        project_feasible(problem, markets, orders);
        const Eigen::VectorXd psi = assemble_psi(problem, markets, orders);
        if (psi(problem.utility.output) > sol.utility_value) {
            sol.market_trades = std::move(markets);
            sol.order_trades = std::move(orders);
            sol.psi = psi;
            sol.utility_value = psi(problem.utility.output);
        }
    }

    double dual_value = model.evaluate(nu, 0.0, nullptr);
    for (const Eigen::VectorXd& candidate : {model.snapped(nu, final_kappa), polished}) {
        if (const double alt = model.evaluate(candidate, 0.0, nullptr); alt < dual_value) {
            dual_value = alt;
            sol.prices.nu = candidate;
        }
    }
    sol.duality_gap = dual_value - sol.utility_value;
    const double allowed = options.tol * std::max(1.0, std::abs(sol.utility_value));
    sol.status = sol.duality_gap <= allowed ? SolveStatus::Optimal : SolveStatus::MaxIter;
    return sol;
}

std::vector<CurvePoint> output_curve(const RoutingProblem& problem, std::span<const double> s_grid,
                                     const SolverOptions& options)
{
    for (std::size_t i = 0; i < s_grid.size(); ++i) {
        if (!(s_grid[i] >= 0.0))
            throw InvalidInput("budget grid must be nonnegative");
        if (i > 0 && !(s_grid[i] > s_grid[i - 1]))
            throw InvalidInput("budget grid must be increasing");
    }
    std::vector<CurvePoint> curve;
    curve.reserve(s_grid.size());
    SolverOptions opts = options;
    for (double s : s_grid) {
        auto sol = solve_routing(problem.with_budget(s), opts);
        opts.warm_start = sol.prices;
        curve.push_back({s, sol.utility_value, std::move(sol)});
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Brute force oracle
// ---------------------------------------------------------------------------

RoutingSolution brute_force_route(const RoutingProblem& problem, int resolution)
{
    problem.validate();
    if (resolution < 1)
        throw InvalidInput("resolution must be positive");
    if (problem.markets.size() > 2 || problem.orders.size() > 2)
        throw InvalidInput("brute force route supports at most two markets and two orders");
    const int in = problem.utility.input;
    const int out = problem.utility.output;

    struct Leg
    {
        int market = -1;
        Eigen::Index local_in = 0;
        Eigen::Index local_out = 0;
    };
    std::vector<Leg> legs;
    for (int i = 0; i < static_cast<int>(problem.markets.size()); ++i) {
        const auto& a = problem.markets[static_cast<std::size_t>(i)].assets;
        const auto it_in = std::find(a.begin(), a.end(), in);
        const auto it_out = std::find(a.begin(), a.end(), out);
        if (it_in == a.end() || it_out == a.end())
            throw InvalidInput("brute force route needs every market to trade input against output directly");
        legs.push_back({i, it_in - a.begin(), it_out - a.begin()});
    }
    for (const auto& o : problem.orders)
        if (o.input_asset != in || o.output_asset != out)
            throw InvalidInput("brute force route needs every order to trade input against output directly");
    if (!problem.orders.empty())
        legs.push_back({-1, 0, 0});
    if (legs.empty())
        throw NoFeasibleRoute("no legs between input and output");

    auto leg_output = [&](const Leg& leg, double x) {
        if (leg.market < 0)
            return max_fill_output(problem.orders, x);
        return forward_exchange(problem.markets[static_cast<std::size_t>(leg.market)].market, leg.local_in, leg.local_out, x);
    };

    const double s = problem.utility.budget;
    const double step = s / resolution;
    std::vector<double> best_split(legs.size(), 0.0);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> split(legs.size(), 0.0);
    auto consider = [&] {
        double total = 0.0;
        for (std::size_t l = 0; l < legs.size(); ++l)
            total += leg_output(legs[l], split[l]);
        if (total > best) {
            best = total;
            best_split = split;
        }
    };

    if (legs.size() == 1) {
        split[0] = s;
        consider();
    } else if (legs.size() == 2) {
        for (int i = 0; i <= resolution; ++i) {
            split[0] = i * step;
            split[1] = (resolution - i) * step;
            consider();
        }
    } else {
        for (int i = 0; i <= resolution; ++i)
            for (int j = 0; i + j <= resolution; ++j) {
                split[0] = i * step;
                split[1] = j * step;
                split[2] = (resolution - i - j) * step;
                consider();
            }
    }

    RoutingSolution sol;
    sol.market_trades.resize(problem.markets.size());
    for (std::size_t i = 0; i < problem.markets.size(); ++i)
        sol.market_trades[i] = zero_trade(problem.markets[i].market.size());
    sol.order_trades.assign(problem.orders.size(), Trade2{});
    for (std::size_t l = 0; l < legs.size(); ++l) {
        const double x = best_split[l];
        if (legs[l].market >= 0) {
            auto& t = sol.market_trades[static_cast<std::size_t>(legs[l].market)];
            t.tendered(legs[l].local_in) = x;
            t.received(legs[l].local_out) = leg_output(legs[l], x);
            continue;
        }
        // fill the orders best price first
        std::vector<std::size_t> idx(problem.orders.size());
        for (std::size_t j = 0; j < idx.size(); ++j)
            idx[j] = j;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return problem.orders[a].price > problem.orders[b].price; });
        double remaining = x;
        for (std::size_t j : idx) {
            const double take = std::min(remaining, problem.orders[j].capacity());
            sol.order_trades[j] = {take, take * problem.orders[j].price};
            remaining -= take;
        }
    }
    sol.psi = assemble_psi(problem, sol.market_trades, sol.order_trades);
    sol.utility_value = best;
    sol.status = SolveStatus::Optimal;
    return sol;
}

FeasibilityReport check_solution(const RoutingProblem& problem, const RoutingSolution& solution)
{
    FeasibilityReport r;
    const Eigen::VectorXd rebuilt = assemble_psi(problem, solution.market_trades, solution.order_trades);
    r.reconstruction = (solution.psi - rebuilt).lpNorm<Eigen::Infinity>();
    for (std::size_t i = 0; i < problem.markets.size(); ++i) {
        const auto& m = problem.markets[i].market;
        const auto& t = solution.market_trades[i];
        if ((t.tendered.array() < 0.0).any() || (t.received.array() < 0.0).any()) {
            r.market_residual = std::numeric_limits<double>::infinity();
            continue;
        }
        const Eigen::VectorXd after = m.reserves + m.fee * t.tendered - t.received;
        if ((after.array() < 0.0).any()) {
            r.market_residual = std::numeric_limits<double>::infinity();
            continue;
        }
        const double before = trading_function(m, m.reserves);
        r.market_residual = std::max(r.market_residual, (before - trading_function(m, after)) / before);
    }
    for (std::size_t j = 0; j < problem.orders.size(); ++j) {
        const auto& o = problem.orders[j];
        const auto& z = solution.order_trades[j];
        const double slack = std::min({z.tendered, z.received, o.price * z.tendered - z.received, o.volume - z.received});
        r.order_slack = std::max(r.order_slack, -slack);
    }
    const Eigen::VectorXd held = solution.psi + problem.initial_holdings();
    r.holdings_slack = std::max(0.0, -held.minCoeff());
    return r;
}

} // namespace hookroute
