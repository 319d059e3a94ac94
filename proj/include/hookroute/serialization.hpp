#pragma once

#include <string>

#include <json.hpp>

#include "hookroute/liquidation.hpp"
#include "hookroute/noncomposable.hpp"
#include "hookroute/routing.hpp"

namespace hookroute {

using Json = nlohmann::json;

/// Parses a file; throws ConfigError naming the document on failure.
Json load_json_file(const std::string& path);

Json to_json(const Market& m);
Json to_json(const LimitOrder& o);
Json to_json(const RoutingProblem& p);

Market market_from_json(const Json& j, const std::string& path = "market");
LimitOrder order_from_json(const Json& j, const std::string& path = "order");
RoutingProblem routing_problem_from_json(const Json& j);

/// Everything the liquidation commands read from one document.
struct LiquidationConfig
{
    PoolParams pool;
    MispricingParams mispricing;
    MdpConfig mdp;
};

Json to_json(const LiquidationConfig& c);
LiquidationConfig liquidation_config_from_json(const Json& j);

Json to_json(const HookScenario& s);
HookScenario hook_scenario_from_json(const Json& j);

} // namespace hookroute
