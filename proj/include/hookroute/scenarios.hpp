#pragma once

#include "hookroute/routing.hpp"

namespace hookroute {

/// Two-asset network: a fee-free product pool (1, 4) and, optionally, a
/// limit order at price 1 for volume 1. Asset 0 is tendered.
RoutingProblem pigou_problem(double budget, bool with_order = true);

/// The pool/order pair behind pigou_problem as a spliced exchange curve.
ModifiedExchangeCurve pigou_curve();

/// Three assets, five markets and two limit orders; liquidates asset 0 into asset 2.
RoutingProblem table1_problem(double budget);

} // namespace hookroute
