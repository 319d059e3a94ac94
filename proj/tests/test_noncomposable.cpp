#include <cmath>
#include <vector>

#include <doctest.h>

#include "generators.hpp"
#include "hookroute/errors.hpp"
#include "hookroute/noncomposable.hpp"

using namespace hookroute;
using hookroute::testing::Gen;
using hookroute::testing::grid_argmax;

namespace {

HookScenario random_scenario(Gen& gen)
{
    HookScenario s;
    s.total = gen.log_uniform(1.0, 200.0);
    s.r = gen.log_uniform(10.0, 500.0);
    s.r_prime = s.r * gen.uniform(0.5, 2.0);
    s.rn = gen.log_uniform(10.0, 500.0);
    s.rn_prime = s.rn * gen.uniform(0.5, 2.0);
    s.alpha = gen.uniform(0.0, 1.0);
    s.variance.form = static_cast<VarianceForm>(gen.integer(0, 3));
    s.variance.beta = gen.log_uniform(1e-3, 10.0);
    s.variance.exponent = gen.uniform(1.1, 1.9);
    s.lambda = gen.uniform(0.0, 2.0);
    return s;
}

} // namespace

TEST_CASE("curves and variance forms")
{
    CHECK(g1(0.0, 100, 100) == 0.0);
    CHECK(g1(100.0, 100, 100) == doctest::Approx(50.0));
    CHECK(g1(1e12, 100, 100) == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(g2(0.0, 100, 100, 0.5) == 0.0);
    CHECK(g2(3.0, 100, 150, 0.0) == doctest::Approx(3.0 * (2.0 - 1.5)));
    CHECK(g2(0.5, 100, 100, 1.0) == doctest::Approx(0.75));

    CHECK(variance(0.0, {VarianceForm::Linear, 2.0}) == 0.0);
    CHECK(variance(0.0, {VarianceForm::Constant, 2.0}) == 2.0);
    CHECK(variance(4.0, {VarianceForm::Superlinear, 1.0, 1.5}) == doctest::Approx(8.0));
    CHECK(variance(3.0, {VarianceForm::Quadratic, 2.0}) == doctest::Approx(18.0));

    for (auto f : {VarianceForm::Constant, VarianceForm::Linear, VarianceForm::Superlinear, VarianceForm::Quadratic})
        CHECK(variance_form_from_string(to_string(f)) == f);
    CHECK_THROWS_AS(variance_form_from_string("cubic"), InvalidInput);

    HookScenario bad;
    bad.alpha = 1.5;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
    bad = HookScenario{};
    bad.variance = {VarianceForm::Superlinear, 1.0, 2.5};
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("objective is concave")
{
    Gen gen(131);
    for (int k = 0; k < 2000; ++k) {
        const auto s = random_scenario(gen);
        const double a = gen.uniform(0.0, s.total);
        const double b = gen.uniform(0.0, s.total);
        const double mid = mean_variance_objective(s, 0.5 * (a + b));
        const double chord = 0.5 * (mean_variance_objective(s, a) + mean_variance_objective(s, b));
        CHECK(mid >= chord - 1e-10 * std::max(1.0, std::abs(chord)));
    }
}

TEST_CASE("mean-variance solve matches a dense grid")
{
    Gen gen(137);
    for (int k = 0; k < 12; ++k) {
        const auto s = random_scenario(gen);
        const auto r = mean_variance_solve(s);
        const double oracle = grid_argmax(s, 1000000);
        CHECK(std::abs(r.delta_star - oracle) <= 1e-5);
        CHECK(r.objective == doctest::Approx(mean_variance_objective(s, r.delta_star)));
    }
}

TEST_CASE("risk-free and constant-variance limits")
{
    HookScenario s;
    s.lambda = 0.0;
    CHECK(mean_variance_solve(s).delta_star == doctest::Approx(max_return(s).delta_star).epsilon(1e-8));

    s.lambda = 1.0;
    s.variance = {VarianceForm::Constant, 0.0};
    const double base = mean_variance_solve(s).delta_star;
    s.variance.beta = 1e6;
    CHECK(std::abs(mean_variance_solve(s).delta_star - base) <= 1e-9);

    s.variance = {VarianceForm::Quadratic, 1e9};
    const double oracle = grid_argmax(s, 1000000);
    CHECK(mean_variance_solve(s).delta_star <= 1e-6);
    CHECK(oracle <= 1e-6 + s.total / 1e6);
}

TEST_CASE("hook share shrinks as variance grows")
{
    for (auto form : {VarianceForm::Linear, VarianceForm::Superlinear, VarianceForm::Quadratic}) {
        for (double alpha : {0.0, 0.25, 0.5, 1.0}) {
            HookScenario s;
            s.alpha = alpha;
            s.variance.form = form;
            double previous = std::numeric_limits<double>::infinity();
            for (int i = 0; i <= 24; ++i) {
                s.variance.beta = std::pow(10.0, -3.0 + 0.25 * i);
                const double d = mean_variance_solve(s).delta_star;
                CHECK(d <= previous + 1e-8);
                previous = d;
            }
        }
    }
}

TEST_CASE("efficient frontier")
{
    HookScenario s;
    s.alpha = 0.2;
    const double pool_only = combined_return(s, 0.0);
    const double peak = max_return(s).objective;
    REQUIRE(peak > pool_only);

    std::vector<double> taus{pool_only - 1.0, pool_only};
    for (int i = 1; i <= 20; ++i)
        taus.push_back(pool_only + (peak - pool_only) * i / 20.0);
    taus.push_back(peak + 1.0);

    for (auto form : {VarianceForm::Linear, VarianceForm::Quadratic}) {
        s.variance = {form, 1.0};
        const auto pts = efficient_frontier(s, taus);
        REQUIRE(pts.size() == taus.size());
        CHECK(pts[0].feasible);
        CHECK(pts[0].delta_star == 0.0);
        CHECK(pts[0].variance_star == 0.0);
        CHECK(pts[1].variance_star == 0.0);
        CHECK_FALSE(pts.back().feasible);
        double previous = -1.0;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            REQUIRE(pts[i].feasible);
            CHECK(pts[i].delta_star >= 0.0);
            CHECK(pts[i].delta_star <= s.total);
            CHECK(combined_return(s, pts[i].delta_star) >= pts[i].tau - 1e-8);
            // nothing smaller reaches the target
            if (pts[i].delta_star > 1e-9)
                CHECK(combined_return(s, pts[i].delta_star - 1e-6) < pts[i].tau);
            CHECK(pts[i].variance_star >= previous - 1e-12);
            previous = pts[i].variance_star;
        }
    }
}
