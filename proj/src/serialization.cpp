#include "hookroute/serialization.hpp"

#include <fstream>
#include <sstream>

#include "hookroute/errors.hpp"

namespace hookroute {

namespace {

std::string join(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

const Json& require(const Json& j, const std::string& key, const std::string& path)
{
    if (!j.is_object())
        throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
    const auto it = j.find(key);
    if (it == j.end())
        throw ConfigError(join(path, key), "missing field");
    return *it;
}

double as_number(const Json& v, const std::string& where)
{
    if (!v.is_number())
        throw ConfigError(where, "expected a number");
    return v.get<double>();
}

int as_int(const Json& v, const std::string& where)
{
    if (!v.is_number_integer())
        throw ConfigError(where, "expected an integer");
    return v.get<int>();
}

double number(const Json& j, const std::string& key, const std::string& path)
{
    return as_number(require(j, key, path), join(path, key));
}

double number_or(const Json& j, const std::string& key, const std::string& path, double fallback)
{
    return j.contains(key) ? number(j, key, path) : fallback;
}

int integer(const Json& j, const std::string& key, const std::string& path)
{
    return as_int(require(j, key, path), join(path, key));
}

int integer_or(const Json& j, const std::string& key, const std::string& path, int fallback)
{
    return j.contains(key) ? integer(j, key, path) : fallback;
}

std::string string_or(const Json& j, const std::string& key, const std::string& path, const std::string& fallback)
{
    if (!j.contains(key))
        return fallback;
    const Json& v = j.at(key);
    if (!v.is_string())
        throw ConfigError(join(path, key), "expected a string");
    return v.get<std::string>();
}

Eigen::VectorXd vector(const Json& j, const std::string& key, const std::string& path)
{
    const Json& v = require(j, key, path);
    const std::string where = join(path, key);
    if (!v.is_array())
        throw ConfigError(where, "expected an array of numbers");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
        out(static_cast<Eigen::Index>(i)) = as_number(v[i], where + "[" + std::to_string(i) + "]");
    return out;
}

Json to_array(const Eigen::VectorXd& v)
{
    Json a = Json::array();
    for (double x : v)
        a.push_back(x);
    return a;
}

// Runs check(), reporting an InvalidInput against `where`.
template <typename F>
void validated(const std::string& where, F check)
{
    try {
        check();
    } catch (const InvalidInput& e) {
        throw ConfigError(where, e.what());
    }
}

std::string kind_name(MarketKind k)
{
    switch (k) {
    case MarketKind::ConstantProduct:
        return "product";
    case MarketKind::GeometricMean:
        return "geometric_mean";
    case MarketKind::ConstantSum:
        return "sum";
    }
    return "product";
}

} // namespace

Json load_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError(path, "cannot open configuration file");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return Json::parse(buf.str());
    } catch (const Json::parse_error& e) {
        throw ConfigError(path, std::string("malformed JSON: ") + e.what());
    }
}

Json to_json(const Market& m)
{
    Json j{{"kind", kind_name(m.kind)}, {"reserves", to_array(m.reserves)}, {"fee", m.fee}};
    if (m.kind == MarketKind::GeometricMean)
        j["weights"] = to_array(m.weights);
    return j;
}

Json to_json(const LimitOrder& o)
{
    return {{"price", o.price}, {"volume", o.volume}, {"input", o.input_asset}, {"output", o.output_asset}};
}

Json to_json(const RoutingProblem& p)
{
    Json markets = Json::array();
    for (const auto& link : p.markets) {
        Json m = to_json(link.market);
        m["assets"] = link.assets;
        markets.push_back(std::move(m));
    }
    Json orders = Json::array();
    for (const auto& o : p.orders)
        orders.push_back(to_json(o));
    return {{"n_assets", p.n_assets},
            {"markets", markets},
            {"orders", orders},
            {"utility",
             {{"liquidate", {{"input", p.utility.input}, {"output", p.utility.output}, {"budget", p.utility.budget}}}}}};
}

Market market_from_json(const Json& j, const std::string& path)
{
    const std::string kind = string_or(j, "kind", path, "");
    if (kind.empty())
        throw ConfigError(join(path, "kind"), "missing field");
    Market m;
    const Eigen::VectorXd reserves = vector(j, "reserves", path);
    const double fee = number_or(j, "fee", path, 1.0);
    if (kind == "product" || kind == "sum") {
        if (reserves.size() != 2)
            throw ConfigError(join(path, "reserves"), "expected two reserves");
        m = kind == "product" ? Market::product(reserves(0), reserves(1), fee) : Market::sum(reserves(0), reserves(1), fee);
    } else if (kind == "geometric_mean") {
        const Eigen::VectorXd weights = vector(j, "weights", path);
        if (weights.size() != reserves.size())
            throw ConfigError(join(path, "weights"), "weights and reserves differ in length");
        m = Market::geometric_mean(weights, reserves, fee);
    } else {
        throw ConfigError(join(path, "kind"), "unknown market kind '" + kind + "'");
    }
    validated(path, [&] { m.validate(); });
    return m;
}

LimitOrder order_from_json(const Json& j, const std::string& path)
{
    LimitOrder o;
    o.price = number(j, "price", path);
    o.volume = number(j, "volume", path);
    o.input_asset = integer(j, "input", path);
    o.output_asset = integer(j, "output", path);
    validated(path, [&] { o.validate(); });
    return o;
}

RoutingProblem routing_problem_from_json(const Json& j)
{
    RoutingProblem p;
    p.n_assets = integer(j, "n_assets", "");
    const Json& markets = require(j, "markets", "");
    if (!markets.is_array())
        throw ConfigError("markets", "expected an array");
    for (std::size_t i = 0; i < markets.size(); ++i) {
        const std::string path = "markets[" + std::to_string(i) + "]";
        MarketLink link;
        link.market = market_from_json(markets[i], path);
        const Json& assets = require(markets[i], "assets", path);
        if (!assets.is_array())
            throw ConfigError(path + ".assets", "expected an array of asset ids");
        for (std::size_t a = 0; a < assets.size(); ++a)
            link.assets.push_back(as_int(assets[a], path + ".assets[" + std::to_string(a) + "]"));
        p.markets.push_back(std::move(link));
    }
    if (j.contains("orders")) {
        const Json& orders = j.at("orders");
        if (!orders.is_array())
            throw ConfigError("orders", "expected an array");
        for (std::size_t i = 0; i < orders.size(); ++i)
            p.orders.push_back(order_from_json(orders[i], "orders[" + std::to_string(i) + "]"));
    }
    const Json& liq = require(require(j, "utility", ""), "liquidate", "utility");
    p.utility.input = integer(liq, "input", "utility.liquidate");
    p.utility.output = integer(liq, "output", "utility.liquidate");
    p.utility.budget = number_or(liq, "budget", "utility.liquidate", 0.0);
    validated("<problem>", [&] { p.validate(); });
    return p;
}

Json to_json(const LiquidationConfig& c)
{
    const auto& m = c.mdp;
    return {{"pool",
             {{"r", c.pool.r},
              {"r_prime", c.pool.r_prime},
              {"gamma_plus", c.pool.gamma_plus},
              {"gamma_minus", c.pool.gamma_minus},
              {"p_ext", c.pool.p_ext}}},
            {"mispricing", {{"mu", c.mispricing.mu}, {"sigma", c.mispricing.sigma}, {"dt", c.mispricing.dt}}},
            {"mdp",
             {{"horizon", m.horizon},
              {"inventory", m.inventory},
              {"gas", m.gas},
              {"inventory_cost", m.inventory_cost},
              {"discount", m.discount},
              {"n_inventory", m.n_inventory},
              {"n_mispricing", m.n_mispricing},
              {"n_actions", m.n_actions},
              {"quadrature_order", m.quadrature_order},
              {"mode", m.mode == DynamicsMode::Additive ? "additive" : "multiplicative"},
              {"z_min", m.z_min},
              {"z_max", m.z_max},
              {"z0", m.z0}}}};
}

LiquidationConfig liquidation_config_from_json(const Json& j)
{
    LiquidationConfig c;
    const Json& pool = require(j, "pool", "");
    const double r = number(pool, "r", "pool");
    const double r_prime = number(pool, "r_prime", "pool");
    const double gp = number_or(pool, "gamma_plus", "pool", 0.003);
    const double gm = number_or(pool, "gamma_minus", "pool", 0.003);
    const double p_ext = number_or(pool, "p_ext", "pool", 0.0);
    validated("pool", [&] { c.pool = PoolParams::from_reserves(r, r_prime, gp, gm, p_ext); });

    if (j.contains("mispricing")) {
        const Json& mp = j.at("mispricing");
        c.mispricing.mu = number_or(mp, "mu", "mispricing", 0.0);
        c.mispricing.sigma = number_or(mp, "sigma", "mispricing", 0.0);
        c.mispricing.dt = number_or(mp, "dt", "mispricing", 1.0);
    }
    validated("mispricing", [&] { c.mispricing.validate(); });

    const Json& mdp = require(j, "mdp", "");
    auto& m = c.mdp;
    m.horizon = integer(mdp, "horizon", "mdp");
    m.inventory = number(mdp, "inventory", "mdp");
    m.gas = number_or(mdp, "gas", "mdp", m.gas);
    m.inventory_cost = number_or(mdp, "inventory_cost", "mdp", m.inventory_cost);
    m.discount = number_or(mdp, "discount", "mdp", m.discount);
    m.n_inventory = integer_or(mdp, "n_inventory", "mdp", m.n_inventory);
    m.n_mispricing = integer_or(mdp, "n_mispricing", "mdp", m.n_mispricing);
    m.n_actions = integer_or(mdp, "n_actions", "mdp", m.n_actions);
    m.quadrature_order = integer_or(mdp, "quadrature_order", "mdp", m.quadrature_order);
    const std::string mode = string_or(mdp, "mode", "mdp", "multiplicative");
    if (mode == "multiplicative")
        m.mode = DynamicsMode::MultiplicativeLiteral;
    else if (mode == "additive")
        m.mode = DynamicsMode::Additive;
    else
        throw ConfigError("mdp.mode", "expected 'multiplicative' or 'additive'");
    m.z_min = number_or(mdp, "z_min", "mdp", 0.0);
    m.z_max = number_or(mdp, "z_max", "mdp", 0.0);
    m.z0 = number_or(mdp, "z0", "mdp", 0.0);
    try {
        m.validate();
    } catch (const ConfigError& e) {
        throw ConfigError("mdp." + e.field(), e.what());
    }
    try {
        mispricing_grid(m, c.pool);
    } catch (const ConfigError& e) {
        throw ConfigError("mdp.z_min", e.what());
    }
    return c;
}

Json to_json(const HookScenario& s)
{
    return {{"total", s.total},
            {"r", s.r},
            {"r_prime", s.r_prime},
            {"rn", s.rn},
            {"rn_prime", s.rn_prime},
            {"alpha", s.alpha},
            {"lambda", s.lambda},
            {"variance",
             {{"form", to_string(s.variance.form)}, {"beta", s.variance.beta}, {"exponent", s.variance.exponent}}}};
}

HookScenario hook_scenario_from_json(const Json& j)
{
    HookScenario s;
    if (!j.is_object())
        throw ConfigError("<root>", "expected an object");
    s.total = number_or(j, "total", "", s.total);
    s.r = number_or(j, "r", "", s.r);
    s.r_prime = number_or(j, "r_prime", "", s.r_prime);
    s.rn = number_or(j, "rn", "", s.rn);
    s.rn_prime = number_or(j, "rn_prime", "", s.rn_prime);
    s.alpha = number_or(j, "alpha", "", s.alpha);
    s.lambda = number_or(j, "lambda", "", s.lambda);
    if (j.contains("variance")) {
        const Json& v = j.at("variance");
        const std::string form = string_or(v, "form", "variance", to_string(s.variance.form));
        validated("variance.form", [&] { s.variance.form = variance_form_from_string(form); });
        s.variance.beta = number_or(v, "beta", "variance", s.variance.beta);
        s.variance.exponent = number_or(v, "exponent", "variance", s.variance.exponent);
    }
    validated("<scenario>", [&] { s.validate(); });
    return s;
}

} // namespace hookroute
