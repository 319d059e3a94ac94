#pragma once

#include <span>
#include <string>
#include <vector>

namespace hookroute {

enum class VarianceForm { Constant, Linear, Superlinear, Quadratic };

struct VarianceSpec
{
    VarianceForm form = VarianceForm::Linear;
    double beta = 1.0;
    double exponent = 1.5; ///< superlinear only, in (1, 2)
};

std::string to_string(VarianceForm form);
VarianceForm variance_form_from_string(const std::string& name);

/// Split of a trade of size D between a product pool and a noncomposable hook.
/// delta is always the amount sent to the hook.
struct HookScenario
{
    double total = 100.0; ///< D
    double r = 100.0;
    double r_prime = 100.0;
    double rn = 100.0;
    double rn_prime = 100.0;
    double alpha = 0.5;
    VarianceSpec variance;
    double lambda = 1.0;

    void validate() const;
};

double g1(double delta, double r, double r_prime);
double g2(double delta, double rn, double rn_prime, double alpha);
double variance(double delta, const VarianceSpec& spec);

/// Expected output G1(D - delta) + G2(delta).
double combined_return(const HookScenario& s, double delta);

/// Combined return minus lambda times the variance.
double mean_variance_objective(const HookScenario& s, double delta);

struct MeanVarianceResult
{
    double delta_star = 0.0;
    double objective = 0.0;
};

MeanVarianceResult mean_variance_solve(const HookScenario& s);

struct FrontierPoint
{
    double tau = 0.0;
    double delta_star = 0.0;
    double variance_star = 0.0;
    bool feasible = false;
};

std::vector<FrontierPoint> efficient_frontier(const HookScenario& s, std::span<const double> tau_grid);

/// Largest combined return over [0, D] and the hook trade attaining it.
MeanVarianceResult max_return(const HookScenario& s);

} // namespace hookroute
