#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace hookroute {

/// Constant-product pool seen at a fixed liquidity L. Fee bounds are in log units.
struct PoolParams
{
    double r = 1.0;
    double r_prime = 1.0;
    double liquidity = 1.0;
    double gamma_plus = 0.003;
    double gamma_minus = 0.003;
    double p_ext = 1.0; ///< external reference price p'

    /// L from the reserves; p' defaults to the pool price R'/R.
    static PoolParams from_reserves(double r, double r_prime, double gamma_plus, double gamma_minus, double p_ext = 0.0);

    void validate() const;
};

struct MispricingParams
{
    double mu = 0.0;
    double sigma = 0.0;
    double dt = 1.0;

    void validate() const;
};

enum class DynamicsMode {
    MultiplicativeLiteral, ///< z' = z* exp(drift + noise + jump); absorbing at zero
    Additive               ///< z' = z* + drift + noise + jump
};

struct MdpConfig
{
    int horizon = 200;
    double inventory = 1000.0;
    double gas = 2.0;
    double inventory_cost = 0.0; ///< xi
    double discount = 0.01;
    int n_inventory = 101;
    int n_mispricing = 101;
    int n_actions = 51;
    int quadrature_order = 9;
    DynamicsMode mode = DynamicsMode::MultiplicativeLiteral;
    /// Mispricing grid; defaults to the fee band when both are zero.
    double z_min = 0.0;
    double z_max = 0.0;
    /// Starting mispricing for simulations.
    double z0 = 0.0;

    void validate() const;
};

/// Grid used for the mispricing axis; throws ConfigError if it misses the fee band.
Eigen::VectorXd mispricing_grid(const MdpConfig& cfg, const PoolParams& pool);
Eigen::VectorXd inventory_grid(const MdpConfig& cfg);

double clamp_mispricing(double z, double gamma_plus, double gamma_minus);

/// Log price impact of selling delta into a pool at price p with liquidity L.
double jump(double delta, double p, double liquidity);

double step_mispricing(double z, double delta, double eps, const MispricingParams& params, const PoolParams& pool,
                       DynamicsMode mode);

/// Constant-product output for delta at price p, with R = L/sqrt(p) and R' = L sqrt(p).
double exchange_at_price(double delta, double p, double liquidity);

double reward(double inventory, double z, double delta, const MdpConfig& cfg, const PoolParams& pool);

/// value[t](i, j) and action[t](i, j) over inventory_grid x mispricing_grid, t = 0..T-1.
struct MdpSolution
{
    Eigen::VectorXd inventory;
    Eigen::VectorXd mispricing;
    std::vector<Eigen::MatrixXd> value;
    std::vector<Eigen::MatrixXd> action; ///< trade size
};

MdpSolution value_iteration(const MdpConfig& cfg, const PoolParams& pool, const MispricingParams& params);

struct SimResult
{
    std::uint64_t seed = 0;
    Eigen::MatrixXd inventory; ///< paths x (T + 1)
    Eigen::VectorXd output;    ///< numeraire received net of gas, per path
    Eigen::VectorXd reward;    ///< undiscounted sum of rewards, per path
    Eigen::VectorXi trades;
};

SimResult simulate_policy(const MdpSolution& policy, const MdpConfig& cfg, const PoolParams& pool,
                          const MispricingParams& params, int n_paths, std::uint64_t seed);

/// Per-path TWAMM output on the same noise as simulate_policy with the same seed.
Eigen::VectorXd twamm_outputs(const MdpConfig& cfg, const PoolParams& pool, const MispricingParams& params, int n_paths,
                              std::uint64_t seed);

double twamm_value(const MdpConfig& cfg, const PoolParams& pool, const MispricingParams& params, int n_paths,
                   std::uint64_t seed);

struct TwammComparison
{
    double sigma = 0.0;
    double mean_excess = 0.0;
    double stderr_excess = 0.0;
};

std::vector<TwammComparison> compare_vs_twamm(const std::vector<double>& sigma_grid, const MdpConfig& cfg,
                                              const PoolParams& pool, const MispricingParams& params, int n_paths,
                                              std::uint64_t seed);

} // namespace hookroute
