#include "hookroute/quadrature.hpp"

#include <cmath>

#include "hookroute/errors.hpp"

namespace hookroute {

GaussHermite gauss_hermite(int m)
{
    if (m < 1)
        throw InvalidInput("quadrature order must be positive");
    // Jacobi matrix of the physicists' Hermite recurrence
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
    for (int k = 1; k < m; ++k)
        jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);

    GaussHermite rule;
    rule.nodes = std::sqrt(2.0) * eig.eigenvalues();
    rule.weights = eig.eigenvectors().row(0).transpose().array().square();
    rule.weights /= rule.weights.sum();
    return rule;
}

} // namespace hookroute
