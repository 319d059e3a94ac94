#include <cmath>
#include <vector>

#include <doctest.h>

#include "generators.hpp"
#include "hookroute/routing.hpp"
#include "hookroute/scenarios.hpp"

using namespace hookroute;
using hookroute::testing::Gen;
using hookroute::testing::random_two_leg;

namespace {

DualPrices prices(std::initializer_list<double> nu)
{
    DualPrices p;
    p.nu = Eigen::VectorXd::Map(nu.begin(), static_cast<Eigen::Index>(nu.size()));
    return p;
}

void check_invariants(const RoutingProblem& p, const RoutingSolution& sol)
{
    const auto report = check_solution(p, sol);
    CHECK(report.reconstruction <= 1e-8);
    CHECK(report.market_residual <= 1e-8);
    CHECK(report.order_slack <= 1e-8);
    CHECK(report.holdings_slack <= 1e-8);
}

} // namespace

TEST_CASE("problem validation")
{
    auto p = table1_problem(10.0);
    CHECK_NOTHROW(p.validate());
    p.markets[1].assets = {0, 7};
    CHECK_THROWS_AS(p.validate(), InvalidInput);
    p = table1_problem(-1.0);
    CHECK_THROWS_AS(p.validate(), InvalidInput);

    const auto h = table1_problem(5.0).initial_holdings();
    CHECK(h(0) == 5.0);
    CHECK(h(1) == 0.0);
    CHECK(table1_problem(5.0).without_orders().orders.empty());
}

TEST_CASE("arbitrage subproblem")
{
    const std::vector<int> assets{0, 1};
    const auto m = Market::product(10, 10);
    const auto result = arbitrage_subproblem(m, assets, prices({1.0, 4.0}));
    // maximize 4 * 10d / (10 + d) - d; stationary at 10 + d = 20
    CHECK(result.trade.tendered(0) == doctest::Approx(10.0));
    CHECK(result.trade.received(1) == doctest::Approx(5.0));
    CHECK(result.value == doctest::Approx(4.0 * 5.0 - 10.0));

    const auto fee_market = Market::product(10, 10, 0.98);
    const auto inside = arbitrage_subproblem(fee_market, assets, prices({1.0, 1.01}));
    CHECK(inside.value == 0.0);
    CHECK(inside.trade.tendered.isZero());
    CHECK(inside.trade.received.isZero());

    CHECK_THROWS_AS(arbitrage_subproblem(m, assets, prices({0.0, 1.0})), InvalidInput);
}

TEST_CASE("arbitrage subproblem matches a grid oracle")
{
    Gen gen(41);
    for (int k = 0; k < 60; ++k) {
        const Market m = k % 2 ? gen.product() : gen.geometric(2);
        const std::vector<int> assets{0, 1};
        const auto nu = prices({gen.log_uniform(0.1, 10.0), gen.log_uniform(0.1, 10.0)});
        const auto result = arbitrage_subproblem(m, assets, nu);
        double best = 0.0;
        for (int dir = 0; dir < 2; ++dir) {
            const double top = 1e4 * m.reserves(dir);
            for (int i = 1; i <= 20000; ++i) {
                const double d = top * std::pow(i / 20000.0, 3.0);
                best = std::max(best, nu.nu(1 - dir) * forward_exchange(m, dir, 1 - dir, d) - nu.nu(dir) * d);
            }
        }
        CHECK(result.value >= best - 1e-6 * std::max(1.0, best));
        CHECK(result.value <= best + 1e-3 * std::max(1.0, best));
        const double achieved = nu.nu.dot(result.trade.net());
        CHECK(achieved == doctest::Approx(result.value).epsilon(1e-9));
    }
}

TEST_CASE("limit order subproblem")
{
    LimitOrder o;
    o.price = 0.5;
    o.volume = 2.0;
    auto fill = limit_order_subproblem(o, prices({1.0, 3.0}));
    CHECK(fill.trade.tendered == doctest::Approx(4.0));
    CHECK(fill.trade.received == doctest::Approx(2.0));
    CHECK(fill.value == doctest::Approx(2.0));

    fill = limit_order_subproblem(o, prices({1.0, 1.5}));
    CHECK(fill.trade.tendered == 0.0);
    CHECK(fill.trade.received == 0.0);

    fill = limit_order_subproblem(o, prices({1.0, 2.0}));
    CHECK(fill.trade.tendered == doctest::Approx(4.0));
    CHECK(fill.trade.received == doctest::Approx(2.0));
    CHECK(fill.value == doctest::Approx(0.0));
}

TEST_CASE("empty budget routes nothing")
{
    const auto p = pigou_problem(0.0);
    const auto sol = solve_routing(p);
    CHECK(sol.utility_value == 0.0);
    CHECK(sol.psi.isZero());
    for (const auto& t : sol.order_trades)
        CHECK(t.tendered == 0.0);
    check_invariants(p, sol);
}

TEST_CASE("Pigou network reproduces the spliced exchange curve")
{
    const auto curve = pigou_curve();
    for (double d : {0.1, 0.5, 1.0, 2.0, 3.3, 7.5, 10.0}) {
        const auto p = pigou_problem(d);
        const auto sol = solve_routing(p);
        CHECK(sol.status == SolveStatus::Optimal);
        CHECK(sol.utility_value == doctest::Approx(modified_forward_exchange(curve, d)).epsilon(1e-6));
        check_invariants(p, sol);
    }
}

TEST_CASE("single market and single order")
{
    RoutingProblem p;
    p.n_assets = 2;
    p.markets.push_back({Market::product(5, 20, 0.997), {0, 1}});
    p.utility = {0, 1, 3.0};
    auto sol = solve_routing(p);
    CHECK(sol.utility_value == doctest::Approx(forward_exchange(p.markets[0].market, 0, 1, 3.0)).epsilon(1e-8));
    CHECK(brute_force_route(p, 1000).utility_value == doctest::Approx(sol.utility_value).epsilon(1e-9));

    RoutingProblem q;
    q.n_assets = 2;
    LimitOrder o;
    o.price = 0.7;
    o.volume = 2.0;
    q.orders.push_back(o);
    for (double s : {1.0, 2.0, 5.0}) {
        q.utility = {0, 1, s};
        CHECK(solve_routing(q).utility_value == doctest::Approx(std::min(0.7 * s, 2.0)).epsilon(1e-8));
        CHECK(brute_force_route(q, 100).utility_value == doctest::Approx(std::min(0.7 * s, 2.0)).epsilon(1e-9));
    }
}

TEST_CASE("solver agrees with exhaustive search on two legs")
{
    Gen gen(101);
    for (int k = 0; k < 25; ++k) {
        const auto p = random_two_leg(gen);
        const auto sol = solve_routing(p);
        const auto oracle = brute_force_route(p, 10000);
        CHECK(sol.status == SolveStatus::Optimal);
        CHECK(sol.utility_value >= oracle.utility_value * (1 - 1e-3));
        CHECK(std::abs(sol.utility_value - oracle.utility_value) <= 1e-3 * std::max(1.0, oracle.utility_value));
        check_invariants(p, sol);
    }
}

TEST_CASE("brute force refuses large networks")
{
    CHECK_THROWS_AS(brute_force_route(table1_problem(10.0), 100), InvalidInput);
}

TEST_CASE("disconnected asset graph has no route")
{
    RoutingProblem p;
    p.n_assets = 3;
    p.markets.push_back({Market::product(1, 1), {0, 1}});
    p.utility = {0, 2, 1.0};
    CHECK_THROWS_AS(solve_routing(p), NoFeasibleRoute);
}

TEST_CASE("splitting an order is a Minkowski no-op")
{
    Gen gen(61);
    for (int k = 0; k < 10; ++k) {
        RoutingProblem one;
        one.n_assets = 2;
        one.markets.push_back({gen.product(), {0, 1}});
        auto o = gen.order();
        o.price = marginal_rate(one.markets[0].market, 0, 1, 0.0) * gen.uniform(0.3, 1.1);
        one.orders.push_back(o);
        one.utility = {0, 1, gen.log_uniform(0.5, 40.0)};
        RoutingProblem two = one;
        o.volume *= 0.5;
        two.orders = {o, o};
        CHECK(solve_routing(two).utility_value == doctest::Approx(solve_routing(one).utility_value).epsilon(1e-6));
    }
}

TEST_CASE("Table 1 network")
{
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i)
        grid.push_back(25.0 * i);
    const auto base = table1_problem(0.0);
    const auto with = output_curve(base, grid);
    const auto without = output_curve(base.without_orders(), grid);
    REQUIRE(with.size() == grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(with[i].solution.status == SolveStatus::Optimal);
        CHECK(with[i].u >= without[i].u - 1e-6);
        check_invariants(base.with_budget(grid[i]), with[i].solution);
        if (i > 0) {
            CHECK(with[i].u >= with[i - 1].u - 1e-6);
            CHECK(without[i].u >= without[i - 1].u - 1e-6);
        }
        if (i > 0 && i + 1 < grid.size()) {
            CHECK(with[i].u >= 0.5 * (with[i - 1].u + with[i + 1].u) - 1e-6);
            CHECK(without[i].u >= 0.5 * (without[i - 1].u + without[i + 1].u) - 1e-6);
        }
    }
    const auto& last = with.back().solution;
    double from_orders = 0.0;
    for (const auto& t : last.order_trades)
        from_orders += t.received;
    CHECK(from_orders == doctest::Approx(60.0).epsilon(1e-5));
}

TEST_CASE("a limit order activates where the dual price crosses its limit")
{
    // one pool and one order: the order starts filling once the pool's
    // marginal rate has fallen to the limit price
    RoutingProblem p;
    p.n_assets = 2;
    p.markets.push_back({Market::product(10, 10), {0, 1}});
    LimitOrder o;
    o.price = 0.25;
    o.volume = 1.0;
    p.orders.push_back(o);
    const double activation = solve_breakpoint(p.markets[0].market, 0, 1, o).delta1;
    for (double s : {0.5 * activation, 0.9 * activation}) {
        const auto sol = solve_routing(p.with_budget(s));
        CHECK(sol.order_trades[0].received == doctest::Approx(0.0));
        CHECK(sol.prices.nu(0) / sol.prices.nu(1) > o.price);
    }
    const auto past = solve_routing(p.with_budget(activation + 0.5 * o.capacity()));
    CHECK(past.order_trades[0].received == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(past.prices.nu(0) / past.prices.nu(1) == doctest::Approx(o.price).epsilon(1e-6));
}
