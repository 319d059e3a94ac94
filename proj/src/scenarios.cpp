#include "hookroute/scenarios.hpp"

namespace hookroute {

namespace {

LimitOrder pigou_order()
{
    LimitOrder o;
    o.price = 1.0;
    o.volume = 1.0;
    o.input_asset = 0;
    o.output_asset = 1;
    return o;
}

} // namespace

RoutingProblem pigou_problem(double budget, bool with_order)
{
    RoutingProblem p;
    p.n_assets = 2;
    p.markets.push_back({Market::product(1.0, 4.0), {0, 1}});
    if (with_order)
        p.orders.push_back(pigou_order());
    p.utility = {0, 1, budget};
    return p;
}

ModifiedExchangeCurve pigou_curve()
{
    return ModifiedExchangeCurve::build(Market::product(1.0, 4.0), 0, 1, pigou_order());
}

RoutingProblem table1_problem(double budget)
{
    RoutingProblem p;
    p.n_assets = 3;
    p.markets.push_back({Market::geometric_mean(Eigen::Vector3d(3.0, 2.0, 1.0), Eigen::Vector3d(3.0, 0.2, 1.0), 0.98), {0, 1, 2}});
    p.markets.push_back({Market::product(10.0, 1.0, 0.99), {0, 1}});
    p.markets.push_back({Market::product(1.0, 10.0, 0.96), {1, 2}});
    p.markets.push_back({Market::product(20.0, 50.0, 0.97), {0, 2}});
    p.markets.push_back({Market::sum(10.0, 10.0, 0.99), {0, 2}});
    for (auto [price, volume] : {std::pair{0.5, 40.0}, std::pair{0.2, 20.0}}) {
        LimitOrder o;
        o.price = price;
        o.volume = volume;
        o.input_asset = 0;
        o.output_asset = 2;
        p.orders.push_back(o);
    }
    p.utility = {0, 2, budget};
    return p;
}

} // namespace hookroute
