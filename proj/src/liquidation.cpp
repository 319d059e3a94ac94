#include "hookroute/liquidation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <thread>

#include "hookroute/errors.hpp"
#include "hookroute/quadrature.hpp"

namespace hookroute {

namespace {

// Runs body(k) for k in [0, n) on up to hardware_concurrency threads.
// Each k must write only its own outputs.
template <typename Body>
void parallel_for(int n, Body body)
{
    const int workers = std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, std::max(n, 1));
    if (workers == 1) {
        for (int k = 0; k < n; ++k)
            body(k);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (int k = w; k < n; k += workers)
                body(k);
        });
    for (auto& th : pool)
        th.join();
}

std::mt19937_64 path_rng(std::uint64_t seed, int path)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path)};
    return std::mt19937_64(seq);
}

// Position of x on a uniform grid as (lower index, weight of the upper node), clamped to the ends.
std::pair<Eigen::Index, double> locate(const Eigen::VectorXd& grid, double x)
{
    const Eigen::Index n = grid.size();
    const double lo = grid(0);
    const double hi = grid(n - 1);
    if (!(x > lo) || hi == lo)
        return {0, 0.0};
    if (x >= hi)
        return {n - 2, 1.0};
    const double pos = (x - lo) / (hi - lo) * static_cast<double>(n - 1);
    const auto k = std::min(static_cast<Eigen::Index>(pos), n - 2);
    return {k, pos - static_cast<double>(k)};
}

Eigen::Index nearest(const Eigen::VectorXd& grid, double x)
{
    const auto [k, w] = locate(grid, x);
    return w < 0.5 ? k : k + 1;
}

} // namespace

PoolParams PoolParams::from_reserves(double r, double r_prime, double gamma_plus, double gamma_minus, double p_ext)
{
    PoolParams p;
    p.r = r;
    p.r_prime = r_prime;
    p.liquidity = std::sqrt(r * r_prime);
    p.gamma_plus = gamma_plus;
    p.gamma_minus = gamma_minus;
    p.p_ext = p_ext > 0.0 ? p_ext : r_prime / r;
    p.validate();
    return p;
}

void PoolParams::validate() const
{
    if (!(r > 0.0) || !(r_prime > 0.0) || !(liquidity > 0.0))
        throw InvalidInput("pool reserves and liquidity must be positive");
    if (std::abs(liquidity * liquidity - r * r_prime) > 1e-9 * r * r_prime)
        throw InvalidInput("liquidity must satisfy L^2 = R R'");
    if (!(gamma_plus >= 0.0) || !(gamma_minus >= 0.0))
        throw InvalidInput("fee bounds must be nonnegative");
    if (!(p_ext > 0.0))
        throw InvalidInput("external price must be positive");
}

void MispricingParams::validate() const
{
    if (!(sigma >= 0.0) || !std::isfinite(mu))
        throw InvalidInput("volatility must be nonnegative");
    if (!(dt > 0.0))
        throw InvalidInput("time step must be positive");
}

void MdpConfig::validate() const
{
    if (horizon < 1)
        throw ConfigError("horizon", "horizon must be at least one block");
    if (!(inventory > 0.0))
        throw ConfigError("inventory", "inventory must be positive");
    if (!(gas >= 0.0))
        throw ConfigError("gas", "gas must be nonnegative");
    if (!(inventory_cost >= 0.0))
        throw ConfigError("inventory_cost", "inventory cost must be nonnegative");
    if (!(discount > 0.0 && discount <= 1.0))
        throw ConfigError("discount", "discount must lie in (0, 1]");
    if (n_inventory < 2)
        throw ConfigError("n_inventory", "need at least two inventory points");
    if (n_mispricing < 2)
        throw ConfigError("n_mispricing", "need at least two mispricing points");
    if (n_actions < 2)
        throw ConfigError("n_actions", "need at least two actions");
    if (quadrature_order < 2)
        throw ConfigError("quadrature_order", "quadrature order must be at least two");
}

Eigen::VectorXd mispricing_grid(const MdpConfig& cfg, const PoolParams& pool)
{
    double lo = cfg.z_min;
    double hi = cfg.z_max;
    if (lo == 0.0 && hi == 0.0) {
        lo = -pool.gamma_minus;
        hi = pool.gamma_plus;
    }
    // rewards and transitions only see the clamped mispricing, so the band is all that must be covered
    if (lo > -pool.gamma_minus || hi < pool.gamma_plus || !(hi > lo))
        throw ConfigError("z_min", "mispricing grid [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                       "] must cover the fee band; suggested bounds [" +
                                       std::to_string(-pool.gamma_minus) + ", " + std::to_string(pool.gamma_plus) + "]");
    return Eigen::VectorXd::LinSpaced(cfg.n_mispricing, lo, hi);
}

Eigen::VectorXd inventory_grid(const MdpConfig& cfg)
{
    return Eigen::VectorXd::LinSpaced(cfg.n_inventory, 0.0, cfg.inventory);
}

double clamp_mispricing(double z, double gamma_plus, double gamma_minus)
{
    if (z > gamma_plus)
        return gamma_plus;
    if (z < -gamma_minus)
        return -gamma_minus;
    return z;
}

double jump(double delta, double p, double liquidity)
{
    return -2.0 * std::log1p(delta * std::sqrt(p) / liquidity);
}

double step_mispricing(double z, double delta, double eps, const MispricingParams& params, const PoolParams& pool,
                       DynamicsMode mode)
{
    const double zs = clamp_mispricing(z, pool.gamma_plus, pool.gamma_minus);
    const double p = pool.p_ext * std::exp(-zs);
    const double move = (params.mu - 0.5 * params.sigma * params.sigma) * params.dt +
                        params.sigma * std::sqrt(params.dt) * eps + jump(delta, p, pool.liquidity);
    if (mode == DynamicsMode::MultiplicativeLiteral)
        return zs * std::exp(move);
    return zs + move;
}

double exchange_at_price(double delta, double p, double liquidity)
{
    return p * delta / (1.0 + delta * std::sqrt(p) / liquidity);
}

double reward(double inventory, double z, double delta, const MdpConfig& cfg, const PoolParams& pool)
{
    if (delta > inventory)
        throw InvalidInput("trade exceeds inventory");
    if (!(delta >= 0.0))
        throw InvalidInput("trade size must be nonnegative");
    const double excess = exchange_at_price(delta, pool.p_ext * std::exp(-z), pool.liquidity) -
                          exchange_at_price(delta, pool.p_ext, pool.liquidity);
    return excess - (delta > 0.0 ? cfg.gas : 0.0) - cfg.inventory_cost * inventory;
}

MdpSolution value_iteration(const MdpConfig& cfg, const PoolParams& pool, const MispricingParams& params)
{
    cfg.validate();
    pool.validate();
    params.validate();

    MdpSolution sol;
    sol.inventory = inventory_grid(cfg);
    sol.mispricing = mispricing_grid(cfg, pool);
    const int ni = static_cast<int>(sol.inventory.size());
    const int nz = static_cast<int>(sol.mispricing.size());
    const int na = cfg.n_actions;
    const GaussHermite rule = gauss_hermite(cfg.quadrature_order);
    const auto nm = rule.nodes.size();
    const bool additive = cfg.mode == DynamicsMode::Additive;

    // noise part of the log move per quadrature node
    const Eigen::ArrayXd noise = (params.mu - 0.5 * params.sigma * params.sigma) * params.dt +
                           params.sigma * std::sqrt(params.dt) * rule.nodes.array();
    const Eigen::ArrayXd growth = noise.exp();

    // Rewards and price impacts do not depend on t; tabulate them once.
    // Entry (i, j, a) lives at (i * nz + j) * na + a.
    const auto cells = static_cast<std::size_t>(ni) * nz * na;
    std::vector<double> rewards(cells), impact(cells);
    parallel_for(ni, [&](int i) {
        const double inv = sol.inventory(i);
        for (int j = 0; j < nz; ++j) {
            const double zs = clamp_mispricing(sol.mispricing(j), pool.gamma_plus, pool.gamma_minus);
            const double p = pool.p_ext * std::exp(-zs);
            for (int a = 0; a < na; ++a) {
                const double delta = a == na - 1 ? inv : inv * a / (na - 1);
                const auto k = (static_cast<std::size_t>(i) * nz + j) * na + a;
                rewards[k] = reward(inv, zs, delta, cfg, pool);
                const double jmp = jump(delta, p, pool.liquidity);
                impact[k] = additive ? jmp : std::exp(jmp);
            }
        }
    });

    const auto T = static_cast<std::size_t>(cfg.horizon);
    sol.value.assign(T, Eigen::MatrixXd::Zero(ni, nz));
    sol.action.assign(T, Eigen::MatrixXd::Zero(ni, nz));
    const double z_lo = sol.mispricing(0);
    const double z_scale = (nz - 1) / (sol.mispricing(nz - 1) - z_lo);

    for (std::size_t t = T; t-- > 0;) {
        const bool last = t + 1 == T;
        const Eigen::MatrixXd* next = last ? nullptr : &sol.value[t + 1];
        Eigen::MatrixXd& value = sol.value[t];
        Eigen::MatrixXd& action = sol.action[t];
        parallel_for(ni, [&](int i) {
            const double inv = sol.inventory(i);
            const int n_act = inv > 0.0 ? na : 1;
            for (int j = 0; j < nz; ++j) {
                const double zs = clamp_mispricing(sol.mispricing(j), pool.gamma_plus, pool.gamma_minus);
                double best = -std::numeric_limits<double>::infinity();
                double best_delta = 0.0;
                for (int a = 0; a < n_act; ++a) {
                    const double delta = a == na - 1 ? inv : inv * a / (na - 1);
                    const auto k = (static_cast<std::size_t>(i) * nz + j) * na + a;
                    double expected = 0.0;
                    if (!last) {
                        const auto [ii, wi] = locate(sol.inventory, inv - delta);
                        for (Eigen::Index m = 0; m < nm; ++m) {
                            const double z_next = additive ? zs + noise(m) + impact[k] : zs * growth(m) * impact[k];
                            const double pos = std::clamp((z_next - z_lo) * z_scale, 0.0, static_cast<double>(nz - 1));
                            const auto jj = std::min(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(nz - 2));
                            const double wj = pos - static_cast<double>(jj);
                            const double lower = (1.0 - wj) * (*next)(ii, jj) + wj * (*next)(ii, jj + 1);
                            const double upper = wi > 0.0 ? (1.0 - wj) * (*next)(ii + 1, jj) + wj * (*next)(ii + 1, jj + 1) : 0.0;
                            expected += rule.weights(m) * ((1.0 - wi) * lower + wi * upper);
                        }
                    }
                    const double q = rewards[k] + cfg.discount * expected;
                    if (q > best) {
                        best = q;
                        best_delta = delta;
                    }
                }
                value(i, j) = best;
                action(i, j) = best_delta;
            }
        });
    }
    return sol;
}

SimResult simulate_policy(const MdpSolution& policy, const MdpConfig& cfg, const PoolParams& pool,
                          const MispricingParams& params, int n_paths, std::uint64_t seed)
{
    cfg.validate();
    if (n_paths < 1)
        throw InvalidInput("need at least one path");
    if (policy.action.size() != static_cast<std::size_t>(cfg.horizon))
        throw InvalidInput("policy horizon does not match the configuration");

    SimResult res;
    res.seed = seed;
    res.inventory.resize(n_paths, cfg.horizon + 1);
    res.output = Eigen::VectorXd::Zero(n_paths);
    res.reward = Eigen::VectorXd::Zero(n_paths);
    res.trades = Eigen::VectorXi::Zero(n_paths);

    parallel_for(n_paths, [&](int path) {
        auto rng = path_rng(seed, path);
        std::normal_distribution<double> normal;
        double inv = cfg.inventory;
        double z = cfg.z0;
        res.inventory(path, 0) = inv;
        for (int t = 0; t < cfg.horizon; ++t) {
            const double zs = clamp_mispricing(z, pool.gamma_plus, pool.gamma_minus);
            double delta = 0.0;
            if (inv > 0.0) {
                const auto& act = policy.action[static_cast<std::size_t>(t)];
                delta = std::min(act(nearest(policy.inventory, inv), nearest(policy.mispricing, zs)), inv);
            }
            res.reward(path) += reward(inv, zs, delta, cfg, pool);
            if (delta > 0.0) {
                res.output(path) += exchange_at_price(delta, pool.p_ext * std::exp(-zs), pool.liquidity) - cfg.gas;
                res.trades(path) += 1;
            }
            const double eps = normal(rng);
            z = step_mispricing(zs, delta, eps, params, pool, cfg.mode);
            inv -= delta;
            res.inventory(path, t + 1) = inv;
        }
    });
    return res;
}

Eigen::VectorXd twamm_outputs(const MdpConfig& cfg, const PoolParams& pool, const MispricingParams& params, int n_paths,
                              std::uint64_t seed)
{
    cfg.validate();
    if (n_paths < 1)
        throw InvalidInput("need at least one path");
    Eigen::VectorXd out(n_paths);
    const double piece = cfg.inventory / cfg.horizon;
    parallel_for(n_paths, [&](int path) {
        auto rng = path_rng(seed, path);
        std::normal_distribution<double> normal;
        double z = cfg.z0;
        double total = 0.0;
        for (int t = 0; t < cfg.horizon; ++t) {
            const double zs = clamp_mispricing(z, pool.gamma_plus, pool.gamma_minus);
            total += pool.p_ext * std::exp(-zs) * piece;
            const double eps = normal(rng);
            z = step_mispricing(zs, piece, eps, params, pool, cfg.mode);
        }
        out(path) = total - cfg.gas;
    });
    return out;
}

double twamm_value(const MdpConfig& cfg, const PoolParams& pool, const MispricingParams& params, int n_paths,
                   std::uint64_t seed)
{
    return twamm_outputs(cfg, pool, params, n_paths, seed).mean();
}

std::vector<TwammComparison> compare_vs_twamm(const std::vector<double>& sigma_grid, const MdpConfig& cfg,
                                              const PoolParams& pool, const MispricingParams& params, int n_paths,
                                              std::uint64_t seed)
{
    std::vector<TwammComparison> rows;
    for (double sigma : sigma_grid) {
        if (!(sigma >= 0.0))
            throw InvalidInput("volatility grid must be nonnegative");
        MispricingParams p = params;
        p.sigma = sigma;
        const auto sol = value_iteration(cfg, pool, p);
        const auto sim = simulate_policy(sol, cfg, pool, p, n_paths, seed);
        const Eigen::VectorXd excess = sim.output - twamm_outputs(cfg, pool, p, n_paths, seed);
        const double mean = excess.mean();
        double se = 0.0;
        if (n_paths > 1)
            se = std::sqrt((excess.array() - mean).square().sum() / (n_paths - 1) / n_paths);
        rows.push_back({sigma, mean, se});
    }
    return rows;
}

} // namespace hookroute
