#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hookroute/cfmm.hpp"

namespace hookroute {

/// A market together with its local-to-global asset map (`assets[local] = global`).
struct MarketLink
{
    Market market;
    std::vector<int> assets;
};

/// Tender `budget` of `input` and maximize the amount of `output` received.
struct Liquidation
{
    int input = 0;
    int output = 1;
    double budget = 0.0;
};

struct RoutingProblem
{
    int n_assets = 2;
    std::vector<MarketLink> markets;
    std::vector<LimitOrder> orders;
    Liquidation utility;

    void validate() const;

    RoutingProblem with_budget(double budget) const;
    RoutingProblem without_orders() const;

    /// h_init: the user's initial holdings, budget on the input asset.
    Eigen::VectorXd initial_holdings() const;
};

/// Per-asset prices of the decomposition; the output asset is the numeraire.
struct DualPrices
{
    Eigen::VectorXd nu;
};

/// Trade with one market in its local indexing.
struct MarketTrade
{
    Eigen::VectorXd tendered;
    Eigen::VectorXd received;

    Eigen::VectorXd net() const { return received - tendered; }
};

enum class SolveStatus { Optimal, MaxIter };

struct RoutingSolution
{
    Eigen::VectorXd psi;                    ///< net trade with the network, global indexing
    std::vector<MarketTrade> market_trades; ///< local indexing
    std::vector<Trade2> order_trades;
    double utility_value = 0.0;
    SolveStatus status = SolveStatus::Optimal;
    DualPrices prices;
    double duality_gap = 0.0;
    int iterations = 0;
};

struct ArbitrageResult
{
    MarketTrade trade;
    double value = 0.0;
};

struct OrderArbitrageResult
{
    Trade2 trade;
    double value = 0.0;
};

/// argmax over the market's trading set of nu . (received - tendered).
ArbitrageResult arbitrage_subproblem(const Market& m, std::span<const int> assets, const DualPrices& prices);

/// argmax over the order's trapezoid of nu_out * received - nu_in * tendered; ties fill fully.
OrderArbitrageResult limit_order_subproblem(const LimitOrder& order, const DualPrices& prices);

struct SolverOptions
{
    double tol = 1e-7;   ///< relative duality gap (floored at an absolute scale of one output unit)
    int max_iter = 5000; ///< total quasi-Newton iterations across smoothing stages
    std::optional<DualPrices> warm_start;
};

/// Solve the liquidation routing problem by dual decomposition.
/// Throws NoFeasibleRoute when the output asset is unreachable from the input.
RoutingSolution solve_routing(const RoutingProblem& problem, const SolverOptions& options = {});

struct CurvePoint
{
    double s = 0.0;
    double u = 0.0;
    RoutingSolution solution;
};

/// u(s) over a nonnegative increasing grid of budgets.
std::vector<CurvePoint> output_curve(const RoutingProblem& problem, std::span<const double> s_grid,
                                     const SolverOptions& options = {});

/// Exhaustive search over input splits for direct input->output networks
/// with at most two markets and two orders. Test oracle.
RoutingSolution brute_force_route(const RoutingProblem& problem, int resolution);

/// Worst violations of a solution's invariants.
struct FeasibilityReport
{
    double reconstruction = 0.0;  ///< max |psi - sum A_i Delta_i - sum B_j z_j|
    double market_residual = 0.0; ///< max relative shortfall phi(R) - phi(R + fee*z1 - z2)
    double order_slack = 0.0;     ///< most negative order constraint slack (as a positive number)
    double holdings_slack = 0.0;  ///< most negative entry of psi + h_init (as a positive number)
};

FeasibilityReport check_solution(const RoutingProblem& problem, const RoutingSolution& solution);

} // namespace hookroute
