#pragma once

#include <Eigen/Dense>

namespace hookroute {

/// Nodes and weights for E[f(eps)], eps ~ N(0,1): sum_i weights(i) * f(nodes(i)).
struct GaussHermite
{
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

/// Probabilists' rule of order m >= 1 via the Golub-Welsch eigenproblem.
GaussHermite gauss_hermite(int m);

} // namespace hookroute
