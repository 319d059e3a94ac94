#include <cmath>
#include <string>

#include <doctest.h>

#include "generators.hpp"
#include "hookroute/errors.hpp"
#include "hookroute/liquidation.hpp"

using namespace hookroute;
using hookroute::testing::Gen;

namespace {

PoolParams desk_pool(double r = 1e4)
{
    return PoolParams::from_reserves(r, 5000.0 * r, 0.003, 0.003);
}

MdpConfig small_config()
{
    MdpConfig cfg;
    cfg.horizon = 20;
    cfg.inventory = 100.0;
    cfg.n_inventory = 21;
    cfg.n_mispricing = 21;
    cfg.n_actions = 11;
    cfg.quadrature_order = 5;
    cfg.mode = DynamicsMode::Additive;
    return cfg;
}

} // namespace

TEST_CASE("pool parameters from reserves")
{
    const auto pool = desk_pool();
    CHECK(pool.liquidity * pool.liquidity == doctest::Approx(1e4 * 5e7).epsilon(1e-12));
    CHECK(pool.p_ext == doctest::Approx(5000.0));
    auto bad = pool;
    bad.liquidity *= 1.1;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
    MispricingParams m;
    m.sigma = -1.0;
    CHECK_THROWS_AS(m.validate(), InvalidInput);
}

TEST_CASE("clamp to the fee band")
{
    CHECK(clamp_mispricing(0.0, 0.003, 0.003) == 0.0);
    CHECK(clamp_mispricing(0.005, 0.003, 0.003) == 0.003);
    CHECK(clamp_mispricing(-0.01, 0.003, 0.003) == -0.003);
}

TEST_CASE("jump")
{
    CHECK(jump(0.0, 4.0, 10.0) == 0.0);
    // R = L / sqrt(p) = 100; the pool price after selling 10 is R'/R scaled by (100/110)^2
    CHECK(jump(10.0, 1.0, 100.0) == doctest::Approx(2.0 * std::log(100.0 / 110.0)).epsilon(1e-14));
    CHECK(jump(10.0, 1.0, 100.0) == doctest::Approx(-0.19062).epsilon(1e-4));
    CHECK(jump(20.0, 1.0, 100.0) < jump(10.0, 1.0, 100.0));

    Gen gen(71);
    for (int k = 0; k < 2000; ++k) {
        const double p = gen.log_uniform(1e-3, 1e4);
        const double l = gen.log_uniform(1.0, 1e7);
        const double r = l / std::sqrt(p);
        const double delta = gen.log_uniform(1e-6, 10.0) * r;
        const double r_after = r + delta;
        const double rp_after = l * l / r_after;
        const double log_ratio = std::log((rp_after / r_after) / (l * std::sqrt(p) / r));
        CHECK(std::abs(jump(delta, p, l) - log_ratio) <= 1e-12 * std::max(1.0, std::abs(log_ratio)));
    }
}

TEST_CASE("mispricing step")
{
    const auto pool = PoolParams::from_reserves(100.0, 100.0, 0.003, 0.003);
    MispricingParams params;
    params.sigma = 0.003;
    CHECK(step_mispricing(0.0, 0.0, 1.7, params, pool, DynamicsMode::MultiplicativeLiteral) == 0.0);
    CHECK(step_mispricing(0.0, 0.0, 1.0, params, pool, DynamicsMode::Additive) == doctest::Approx(0.0029955).epsilon(1e-12));
    MispricingParams still;
    CHECK(step_mispricing(0.001, 0.0, 0.3, still, pool, DynamicsMode::Additive) == doctest::Approx(0.001));
    // the state is clamped before it moves
    CHECK(step_mispricing(0.01, 0.0, 0.0, still, pool, DynamicsMode::Additive) == doctest::Approx(0.003));
    const double zs = -0.002;
    const double literal = step_mispricing(zs, 5.0, 0.4, params, pool, DynamicsMode::MultiplicativeLiteral);
    const double p = pool.p_ext * std::exp(-zs);
    CHECK(literal == doctest::Approx(zs * std::exp(-0.5 * 9e-6 + 0.003 * 0.4 + jump(5.0, p, pool.liquidity))));
}

TEST_CASE("exchange at a price")
{
    CHECK(exchange_at_price(0.0, 2.0, 10.0) == 0.0);
    CHECK(exchange_at_price(100.0, 1.0, 100.0) == doctest::Approx(100.0 - 1e4 / 200.0));
    CHECK(exchange_at_price(1e-9, 3.0, 1e3) / 1e-9 == doctest::Approx(3.0).epsilon(1e-9));

    Gen gen(73);
    for (int k = 0; k < 500; ++k) {
        const double p = gen.log_uniform(1e-2, 1e4);
        const double l = gen.log_uniform(1.0, 1e6);
        const double delta = gen.log_uniform(1e-3, 1e3);
        const double r = l / std::sqrt(p);
        const double rp = l * std::sqrt(p);
        CHECK(exchange_at_price(delta, p, l) == doctest::Approx(rp - l * l / (r + delta)).epsilon(1e-9));
    }
}

TEST_CASE("reward")
{
    MdpConfig cfg;
    cfg.inventory_cost = 0.5;
    const auto pool = PoolParams::from_reserves(1e5, 5000.0 * 1e5, 0.003, 0.003);
    CHECK(reward(0.0, 0.001, 0.0, cfg, pool) == 0.0);
    CHECK(reward(10.0, 0.0, 4.0, cfg, pool) == doctest::Approx(-cfg.gas - 5.0));
    MdpConfig plain;
    plain.gas = 0.0;
    CHECK(reward(10.0, -0.003, 10.0, plain, pool) > 0.0);
    CHECK(reward(10.0, 0.003, 10.0, plain, pool) < 0.0);
    CHECK_THROWS_AS(reward(1.0, 0.0, 2.0, cfg, pool), InvalidInput);
}

TEST_CASE("configuration errors name their field")
{
    MdpConfig cfg;
    cfg.horizon = 0;
    try {
        cfg.validate();
        FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "horizon");
    }
    MdpConfig narrow;
    narrow.z_min = -0.001;
    narrow.z_max = 0.001;
    try {
        mispricing_grid(narrow, desk_pool());
        FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "z_min");
        CHECK(std::string(e.what()).find("suggested") != std::string::npos);
    }
    const auto grid = mispricing_grid(MdpConfig{}, desk_pool());
    CHECK(grid(0) == doctest::Approx(-0.003));
    CHECK(grid(grid.size() - 1) == doctest::Approx(0.003));
}

TEST_CASE("value iteration boundary rows")
{
    auto cfg = small_config();
    const auto pool = desk_pool();
    MispricingParams params;
    params.sigma = 0.002;
    const auto sol = value_iteration(cfg, pool, params);
    REQUIRE(sol.value.size() == static_cast<std::size_t>(cfg.horizon));
    for (int t = 0; t < cfg.horizon; ++t) {
        const auto& v = sol.value[static_cast<std::size_t>(t)];
        const auto& a = sol.action[static_cast<std::size_t>(t)];
        CHECK(v.row(0).cwiseAbs().maxCoeff() == 0.0);
        CHECK(a.row(0).cwiseAbs().maxCoeff() == 0.0);
        CHECK(v.allFinite());
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            CHECK(a.row(i).maxCoeff() <= sol.inventory(i) + 1e-12);
        // favorable mispricing is negative
        for (Eigen::Index i = 0; i < v.rows(); ++i)
            for (Eigen::Index j = 1; j < v.cols(); ++j)
                CHECK(v(i, j) <= v(i, j - 1) + 1e-9 * (1.0 + std::abs(v(i, j - 1))));
    }

    cfg.gas = 1e12;
    const auto idle = value_iteration(cfg, pool, params);
    for (int t = 0; t < cfg.horizon; ++t) {
        CHECK(idle.value[static_cast<std::size_t>(t)].cwiseAbs().maxCoeff() == 0.0);
        CHECK(idle.action[static_cast<std::size_t>(t)].cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("policy simulation")
{
    const auto cfg = small_config();
    const auto pool = desk_pool();
    MispricingParams params;
    params.sigma = 0.002;
    const auto sol = value_iteration(cfg, pool, params);
    const auto sim = simulate_policy(sol, cfg, pool, params, 50, 7);
    CHECK(sim.seed == 7);
    CHECK((sim.inventory.array() >= 0.0).all());
    for (Eigen::Index t = 1; t < sim.inventory.cols(); ++t)
        CHECK((sim.inventory.col(t).array() <= sim.inventory.col(t - 1).array()).all());

    const auto again = simulate_policy(sol, cfg, pool, params, 50, 7);
    CHECK(again.inventory == sim.inventory);
    CHECK(again.output == sim.output);

    auto frozen = sol;
    for (auto& a : frozen.action)
        a.setZero();
    const auto flat = simulate_policy(frozen, cfg, pool, params, 10, 1);
    CHECK((flat.inventory.array() == cfg.inventory).all());

    MispricingParams still;
    auto start = cfg;
    start.z0 = -0.002;
    const auto quiet = simulate_policy(value_iteration(start, pool, still), start, pool, still, 5, 3);
    for (Eigen::Index p = 1; p < quiet.inventory.rows(); ++p)
        CHECK(quiet.inventory.row(p) == quiet.inventory.row(0));
}

TEST_CASE("TWAMM value")
{
    auto cfg = small_config();
    MispricingParams still;
    auto deep = PoolParams::from_reserves(1e12, 5000.0 * 1e12, 0.003, 0.003);
    const double flat = twamm_value(cfg, deep, still, 3, 1);
    CHECK(flat == doctest::Approx(5000.0 * cfg.inventory - cfg.gas).epsilon(1e-9));

    MispricingParams params;
    params.sigma = 0.003;
    const auto pool = desk_pool();
    const double base = twamm_value(cfg, pool, params, 40, 9);
    cfg.gas += 3.5;
    const double dearer = twamm_value(cfg, pool, params, 40, 9);
    CHECK(dearer < base);
    CHECK(base - dearer == doctest::Approx(3.5).epsilon(1e-9));
}

TEST_CASE("TWAMM comparison uses common random numbers")
{
    const auto cfg = small_config();
    const auto pool = desk_pool();
    MispricingParams params;
    const std::vector<double> sigmas{0.0, 0.002};
    const auto a = compare_vs_twamm(sigmas, cfg, pool, params, 20, 5);
    const auto b = compare_vs_twamm(sigmas, cfg, pool, params, 20, 5);
    REQUIRE(a.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].sigma == sigmas[i]);
        CHECK(a[i].mean_excess == b[i].mean_excess);
        CHECK(a[i].stderr_excess == b[i].stderr_excess);
    }
    CHECK(a[0].stderr_excess == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("value is stable under mispricing grid refinement")
{
    MdpConfig cfg;
    cfg.mode = DynamicsMode::Additive;
    cfg.n_inventory = 51;
    cfg.n_actions = 26;
    cfg.horizon = 100;
    const auto pool = desk_pool();
    MispricingParams params;
    params.sigma = 0.002;
    cfg.n_mispricing = 51;
    const auto coarse = value_iteration(cfg, pool, params);
    cfg.n_mispricing = 101;
    const auto fine = value_iteration(cfg, pool, params);
    const double vc = coarse.value[0](coarse.value[0].rows() - 1, 25);
    const double vf = fine.value[0](fine.value[0].rows() - 1, 50);
    CHECK(std::abs(vf - vc) <= 0.02 * std::abs(vf));
}
