#include "hookroute/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <variant>

#include <CLI11.hpp>

#include "hookroute/errors.hpp"
#include "hookroute/scenarios.hpp"
#include "hookroute/serialization.hpp"

namespace fs = std::filesystem;

namespace hookroute {

std::vector<double> parse_grid(const std::string& spec, const std::string& field)
{
    const auto first = spec.find(':');
    const auto second = first == std::string::npos ? std::string::npos : spec.find(':', first + 1);
    if (second == std::string::npos || spec.find(':', second + 1) != std::string::npos)
        throw ConfigError(field, "grid '" + spec + "' is not of the form start:stop:count");
    double start = 0.0;
    double stop = 0.0;
    long count = 0;
    try {
        std::size_t used = 0;
        const std::string a = spec.substr(0, first);
        const std::string b = spec.substr(first + 1, second - first - 1);
        const std::string c = spec.substr(second + 1);
        start = std::stod(a, &used);
        if (used != a.size())
            throw std::invalid_argument(a);
        stop = std::stod(b, &used);
        if (used != b.size())
            throw std::invalid_argument(b);
        count = std::stol(c, &used);
        if (used != c.size())
            throw std::invalid_argument(c);
    } catch (const std::logic_error&) {
        throw ConfigError(field, "grid '" + spec + "' has a non-numeric part");
    }
    if (count < 1 || !std::isfinite(start) || !std::isfinite(stop))
        throw ConfigError(field, "grid '" + spec + "' needs finite bounds and a positive count");
    if (count == 1)
        return {start};
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (long k = 0; k < count; ++k)
        grid[static_cast<std::size_t>(k)] = start + (stop - start) * static_cast<double>(k) / static_cast<double>(count - 1);
    grid.back() = stop;
    return grid;
}

std::uint64_t fnv1a(std::string_view data)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

std::string hex(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

void write_atomic(const fs::path& path, const std::string& content)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f)
            throw std::runtime_error("cannot write " + tmp.string());
        f << content;
        if (!f)
            throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

using Cell = std::variant<double, long long, std::string>;

struct Table
{
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

enum class Format { Csv, Json };

struct NonConvergence : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

// Shared state of one command run: where outputs go and what the manifest records.
class Run
{
public:
    Run(fs::path out_dir, Format format, bool gnuplot, std::ostream& err)
        : out_dir_(std::move(out_dir)), format_(format), gnuplot_(gnuplot), err_(err)
    {
    }

    void begin(std::vector<std::string> command, const std::string& config, std::optional<std::uint64_t> seed)
    {
        command_ = std::move(command);
        config_hash_ = hex(fnv1a(config));
        seed_ = seed;
        std::string key;
        for (const auto& a : command_)
            key += a + '\n';
        key += config_hash_ + '\n' + (seed_ ? std::to_string(*seed_) : "-") + '\n' + toolkit_version;
        manifest_hash_ = hex(fnv1a(key));
        fs::create_directories(out_dir_);
    }

    void write(const std::string& stem, const Table& t)
    {
        const std::string seed = seed_ ? std::to_string(*seed_) : "none";
        std::string body;
        std::string name = stem;
        if (format_ == Format::Csv) {
            name += ".csv";
            body = "# manifest " + manifest_hash_ + " seed " + seed + "\n";
            for (std::size_t c = 0; c < t.columns.size(); ++c)
                body += (c ? "," : "") + t.columns[c];
            body += '\n';
            for (const auto& row : t.rows) {
                for (std::size_t c = 0; c < row.size(); ++c) {
                    if (c)
                        body += ',';
                    body += std::visit(
                        [](const auto& v) -> std::string {
                            using V = std::decay_t<decltype(v)>;
                            if constexpr (std::is_same_v<V, double>)
                                return format_number(v);
                            else if constexpr (std::is_same_v<V, long long>)
                                return std::to_string(v);
                            else
                                return v;
                        },
                        row[c]);
                }
                body += '\n';
            }
        } else {
            name += ".json";
            Json rows = Json::array();
            for (const auto& row : t.rows) {
                Json r = Json::object();
                for (std::size_t c = 0; c < row.size(); ++c)
                    std::visit([&](const auto& v) { r[t.columns[c]] = v; }, row[c]);
                rows.push_back(std::move(r));
            }
            Json doc{{"manifest", manifest_hash_}, {"seed", seed}, {"columns", t.columns}, {"rows", rows}};
            body = doc.dump(1) + "\n";
        }
        write_atomic(out_dir_ / name, body);
        outputs_.push_back(name);
        if (gnuplot_ && format_ == Format::Csv && emit_gnuplot_stub((out_dir_ / name).string(), err_))
            outputs_.push_back(name + ".gp");
    }

    void finish()
    {
        Json manifest{{"command", command_},
                      {"config_hash", config_hash_},
                      {"manifest_hash", manifest_hash_},
                      {"seed", seed_ ? Json(*seed_) : Json(nullptr)},
                      {"version", toolkit_version},
                      {"outputs", outputs_}};
        write_atomic(out_dir_ / "manifest.json", manifest.dump(1) + "\n");
    }

    const fs::path& out_dir() const { return out_dir_; }

private:
    fs::path out_dir_;
    Format format_;
    bool gnuplot_;
    std::ostream& err_;
    std::vector<std::string> command_;
    std::string config_hash_;
    std::string manifest_hash_;
    std::optional<std::uint64_t> seed_;
    std::vector<std::string> outputs_;
};

RoutingProblem load_problem(const std::string& source)
{
    if (source == "table1")
        return table1_problem(0.0);
    if (source == "pigou")
        return pigou_problem(0.0, true);
    return routing_problem_from_json(load_json_file(source));
}

LiquidationConfig load_liquidation(const std::string& source)
{
    if (source.empty())
        throw ConfigError("config", "a liquidation config file is required");
    return liquidation_config_from_json(load_json_file(source));
}

HookScenario load_scenario(const std::string& source)
{
    if (source.empty())
        return {};
    return hook_scenario_from_json(load_json_file(source));
}

void run_pigou(Run& run, const std::vector<double>& grid, bool with_order)
{
    const auto curve = pigou_curve();
    const Market pool = curve.market;
    Table t{{"D", "u", "reference"}, {}};
    bool converged = true;
    SolverOptions opts;
    for (double d : grid) {
        if (!(d >= 0.0))
            throw ConfigError("grid", "budgets must be nonnegative");
        const auto sol = solve_routing(pigou_problem(d, with_order), opts);
        opts.warm_start = sol.prices;
        converged &= sol.status == SolveStatus::Optimal;
        const double ref = with_order ? modified_forward_exchange(curve, d) : forward_exchange(pool, 0, 1, d);
        t.rows.push_back({d, sol.utility_value, ref});
    }
    run.write("pigou", t);
    if (!converged)
        throw NonConvergence("routing did not reach the duality-gap tolerance on every grid point");
}

void run_route(Run& run, const RoutingProblem& problem, const std::vector<double>& grid)
{
    const auto with = output_curve(problem, grid);
    const auto without = problem.orders.empty() ? with : output_curve(problem.without_orders(), grid);
    Table curve{{"s", "u_with_orders", "u_without_orders"}, {}};
    Table trades{{"s", "market_id", "asset_id", "amount"}, {}};
    bool converged = true;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        curve.rows.push_back({grid[k], with[k].u, without[k].u});
        converged &= with[k].solution.status == SolveStatus::Optimal && without[k].solution.status == SolveStatus::Optimal;
        const auto& sol = with[k].solution;
        for (std::size_t i = 0; i < problem.markets.size(); ++i) {
            const Eigen::VectorXd net = sol.market_trades[i].net();
            for (Eigen::Index a = 0; a < net.size(); ++a)
                trades.rows.push_back({grid[k], static_cast<long long>(i),
                                       static_cast<long long>(problem.markets[i].assets[static_cast<std::size_t>(a)]), net(a)});
        }
        for (std::size_t j = 0; j < problem.orders.size(); ++j) {
            const auto id = static_cast<long long>(problem.markets.size() + j);
            trades.rows.push_back({grid[k], id, static_cast<long long>(problem.orders[j].input_asset), -sol.order_trades[j].tendered});
            trades.rows.push_back({grid[k], id, static_cast<long long>(problem.orders[j].output_asset), sol.order_trades[j].received});
        }
    }
    run.write("curve", curve);
    run.write("trades", trades);
    if (!converged)
        throw NonConvergence("routing did not reach the duality-gap tolerance on every grid point");
}

void run_liquidate_solve(Run& run, const LiquidationConfig& c, int stride)
{
    const auto sol = value_iteration(c.mdp, c.pool, c.mispricing);
    if (stride < 1)
        stride = std::max(1, c.mdp.horizon / 4);
    Table t{{"t", "I", "z", "value", "action"}, {}};
    for (int k = 0; k < c.mdp.horizon; k += stride)
        for (Eigen::Index i = 0; i < sol.inventory.size(); ++i)
            for (Eigen::Index j = 0; j < sol.mispricing.size(); ++j)
                t.rows.push_back({static_cast<long long>(k), sol.inventory(i), sol.mispricing(j),
                                  sol.value[static_cast<std::size_t>(k)](i, j), sol.action[static_cast<std::size_t>(k)](i, j)});
    run.write("value", t);
}

void run_liquidate_simulate(Run& run, const LiquidationConfig& c, int paths, std::uint64_t seed)
{
    const auto sol = value_iteration(c.mdp, c.pool, c.mispricing);
    const auto sim = simulate_policy(sol, c.mdp, c.pool, c.mispricing, paths, seed);
    Table inv{{"path", "t", "inventory"}, {}};
    for (Eigen::Index p = 0; p < sim.inventory.rows(); ++p)
        for (Eigen::Index t = 0; t < sim.inventory.cols(); ++t)
            inv.rows.push_back({static_cast<long long>(p), static_cast<long long>(t), sim.inventory(p, t)});
    Table per_path{{"path", "output", "reward", "trades"}, {}};
    for (Eigen::Index p = 0; p < sim.output.size(); ++p)
        per_path.rows.push_back({static_cast<long long>(p), sim.output(p), sim.reward(p), static_cast<long long>(sim.trades(p))});
    run.write("inventory", inv);
    run.write("paths", per_path);
}

void run_compare(Run& run, const LiquidationConfig& c, const std::vector<double>& sigmas, int paths, std::uint64_t seed)
{
    const auto rows = compare_vs_twamm(sigmas, c.mdp, c.pool, c.mispricing, paths, seed);
    Table t{{"sigma", "mean_excess", "stderr"}, {}};
    for (const auto& r : rows)
        t.rows.push_back({r.sigma, r.mean_excess, r.stderr_excess});
    run.write("comparison", t);
}

const std::vector<VarianceForm> all_forms{VarianceForm::Constant, VarianceForm::Linear, VarianceForm::Superlinear,
                                          VarianceForm::Quadratic};

void run_hook_mv(Run& run, const HookScenario& base, const std::vector<double>& alphas, const std::vector<double>& log_betas)
{
    Table t{{"alpha", "beta", "variance_form", "delta_star", "objective"}, {}};
    for (auto form : all_forms)
        for (double alpha : alphas)
            for (double lb : log_betas) {
                HookScenario s = base;
                s.alpha = alpha;
                s.variance.form = form;
                s.variance.beta = std::pow(10.0, lb);
                const auto r = mean_variance_solve(s);
                t.rows.push_back({alpha, s.variance.beta, to_string(form), r.delta_star, r.objective});
            }
    run.write("mean_variance", t);
}

void run_hook_frontier(Run& run, const HookScenario& base, const std::optional<std::vector<double>>& taus, int count)
{
    std::vector<double> grid;
    if (taus) {
        grid = *taus;
    } else {
        const double lo = combined_return(base, 0.0);
        const double hi = max_return(base).objective;
        for (int k = 0; k < count; ++k)
            grid.push_back(count == 1 ? lo : lo + (hi - lo) * k / (count - 1));
    }
    for (auto form : all_forms) {
        HookScenario s = base;
        s.variance.form = form;
        Table t{{"tau", "delta_star", "variance_star", "feasible"}, {}};
        for (const auto& pt : efficient_frontier(s, grid))
            t.rows.push_back({pt.tau, pt.delta_star, pt.variance_star, static_cast<long long>(pt.feasible)});
        run.write("frontier_" + to_string(form), t);
    }
}

std::vector<std::string> command_echo(int argc, const char* const* argv)
{
    std::vector<std::string> echo;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--out") {
            ++i;
            continue;
        }
        if (a.rfind("--out=", 0) == 0)
            continue;
        echo.push_back(a);
    }
    return echo;
}

void report_error(std::ostream& err, const fs::path& out_dir, int code, const std::string& kind, const std::string& message,
                  const std::string& field)
{
    Json e{{"error", kind}, {"message", message}, {"exit_code", code}};
    if (!field.empty())
        e["field"] = field;
    err << e.dump() << "\n";
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!ec) {
        try {
            write_atomic(out_dir / "error.json", e.dump(1) + "\n");
        } catch (const std::exception&) {
        }
    }
}

} // namespace

bool emit_gnuplot_stub(const std::string& csv_path, std::ostream& warn)
{
    std::ifstream in(csv_path);
    std::string line;
    std::string header;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') {
            header = line;
            break;
        }
    const std::string csv = fs::path(csv_path).filename().string();
    std::string script = "set datafile separator ','\nset key autotitle columnhead\n";
    script += "set terminal pngcairo size 900,600\nset output '" + csv + ".png'\n";
    if (header == "s,u_with_orders,u_without_orders") {
        script += "set xlabel 's'\nset ylabel 'u(s)'\nplot '" + csv + "' using 1:2 with lines, '' using 1:3 with lines\n";
    } else if (header == "D,u,reference") {
        script += "set xlabel 'D'\nset ylabel 'output'\nplot '" + csv + "' using 1:2 with lines, '' using 1:3 with points\n";
    } else if (header == "path,t,inventory") {
        script += "set xlabel 't'\nset ylabel 'inventory'\nunset key\n"
                  "plot '" + csv + "' using 2:(column(1) == 0 ? $3 : 1/0) with lines, for [p=1:9] '' using 2:(column(1) == p ? $3 : 1/0) with lines\n";
    } else if (header == "sigma,mean_excess,stderr") {
        script += "set xlabel 'sigma'\nset ylabel 'excess over TWAMM'\nplot '" + csv + "' using 1:2:3 with yerrorlines\n";
    } else if (header == "tau,delta_star,variance_star,feasible") {
        script += "set xlabel 'variance'\nset ylabel 'tau'\nplot '" + csv + "' using 3:($4 > 0 ? $1 : 1/0) with lines\n";
    } else if (header == "alpha,beta,variance_form,delta_star,objective") {
        script += "set xlabel 'alpha'\nset ylabel 'delta*'\nplot '" + csv + "' using 1:4 with points\n";
    } else {
        warn << "warning: no plotting template for " << csv_path << "\n";
        return false;
    }
    write_atomic(csv_path + ".gp", script);
    return true;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Routing, liquidation and hook experiments over CFMM networks", "hookroute"};
    app.require_subcommand(1);
    app.set_version_flag("--version", toolkit_version);

    std::string out_dir = "out";
    std::string format = "csv";
    bool gnuplot = false;
    std::string config;
    std::string grid;
    std::uint64_t seed = 1;
    int paths = 0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
        sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
        sub->add_flag("--gnuplot", gnuplot, "Also write a gnuplot script per CSV");
    };

    bool with_order = false;
    auto* pigou = app.add_subcommand("pigou", "Output curve of the two-asset Pigou network");
    pigou->add_option("--grid", grid, "Budget grid start:stop:count")->default_val("0:10:100");
    pigou->add_flag("--with-order", with_order, "Include the limit order");
    common(pigou);

    auto* route = app.add_subcommand("route", "u(s) with and without limit orders for a routing problem");
    route->add_option("--config,--problem", config, "Problem JSON file, or 'table1' / 'pigou'")->required();
    route->add_option("--grid,--s", grid, "Budget grid start:stop:count")->default_val("0:500:100");
    common(route);

    int stride = 0;
    auto* solve = app.add_subcommand("liquidate-solve", "Value function and policy of the liquidation MDP");
    solve->add_option("--config", config, "Liquidation config JSON")->required();
    solve->add_option("--stride", stride, "Dump every stride-th time step (default: four slices)");
    common(solve);

    auto* simulate = app.add_subcommand("liquidate-simulate", "Monte Carlo inventory paths under the optimal policy");
    simulate->add_option("--config", config, "Liquidation config JSON")->required();
    simulate->add_option("--seed", seed, "Random seed")->capture_default_str();
    simulate->add_option("--paths", paths, "Number of paths")->default_val(200);
    common(simulate);

    auto* compare = app.add_subcommand("compare-twamm", "Excess value of the optimal policy over a TWAMM order");
    compare->add_option("--config", config, "Liquidation config JSON")->required();
    compare->add_option("--grid", grid, "Volatility grid start:stop:count")->default_val("0:8:5");
    compare->add_option("--seed", seed, "Random seed")->capture_default_str();
    compare->add_option("--paths", paths, "Number of paths")->default_val(500);
    common(compare);

    std::string alpha_grid;
    std::string log_beta_grid;
    auto* mv = app.add_subcommand("hook-mv", "Mean-variance split between a pool and a noncomposable hook");
    mv->add_option("--config", config, "Hook scenario JSON (defaults when omitted)");
    mv->add_option("--grid,--alpha-grid", alpha_grid, "Alpha grid start:stop:count")->default_val("0:1:50");
    mv->add_option("--log-beta-grid", log_beta_grid, "log10(beta) grid start:stop:count")->default_val("-3:3:13");
    common(mv);

    int tau_count = 50;
    auto* frontier = app.add_subcommand("hook-frontier", "Efficient frontier per variance form");
    frontier->add_option("--config", config, "Hook scenario JSON (defaults when omitted)");
    frontier->add_option("--grid", grid, "Target return grid start:stop:count (default spans the achievable range)");
    frontier->add_option("--points", tau_count, "Points in the default target grid")->capture_default_str();
    common(frontier);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForVersion& e) {
        out << toolkit_version << "\n";
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        report_error(err, out_dir, exit_config, "usage", e.what(), "");
        return exit_config;
    }

    Run run(out_dir, format == "json" ? Format::Json : Format::Csv, gnuplot, err);
    const auto echo = command_echo(argc, argv);
    try {
        if (pigou->parsed()) {
            const auto g = parse_grid(grid);
            run.begin(echo, std::string("pigou ") + (with_order ? "with-order" : "pool-only"), std::nullopt);
            run_pigou(run, g, with_order);
        } else if (route->parsed()) {
            const auto problem = load_problem(config);
            const auto g = parse_grid(grid);
            for (std::size_t k = 0; k < g.size(); ++k)
                if (g[k] < 0.0 || (k > 0 && !(g[k] > g[k - 1])))
                    throw ConfigError("grid", "budget grid must be nonnegative and increasing");
            run.begin(echo, to_json(problem).dump(), std::nullopt);
            run_route(run, problem, g);
        } else if (solve->parsed()) {
            const auto c = load_liquidation(config);
            run.begin(echo, to_json(c).dump(), std::nullopt);
            run_liquidate_solve(run, c, stride);
        } else if (simulate->parsed()) {
            const auto c = load_liquidation(config);
            if (paths < 1)
                throw ConfigError("paths", "need at least one path");
            run.begin(echo, to_json(c).dump(), seed);
            run_liquidate_simulate(run, c, paths, seed);
        } else if (compare->parsed()) {
            const auto c = load_liquidation(config);
            const auto g = parse_grid(grid);
            for (double s : g)
                if (s < 0.0)
                    throw ConfigError("grid", "volatilities must be nonnegative");
            if (paths < 1)
                throw ConfigError("paths", "need at least one path");
            run.begin(echo, to_json(c).dump(), seed);
            run_compare(run, c, g, paths, seed);
        } else if (mv->parsed()) {
            const auto s = load_scenario(config);
            const auto alphas = parse_grid(alpha_grid, "alpha-grid");
            for (double a : alphas)
                if (a < 0.0 || a > 1.0)
                    throw ConfigError("alpha-grid", "alpha must lie in [0, 1]");
            const auto betas = parse_grid(log_beta_grid, "log-beta-grid");
            run.begin(echo, to_json(s).dump(), std::nullopt);
            run_hook_mv(run, s, alphas, betas);
        } else if (frontier->parsed()) {
            const auto s = load_scenario(config);
            std::optional<std::vector<double>> taus;
            if (!grid.empty())
                taus = parse_grid(grid);
            if (tau_count < 1)
                throw ConfigError("points", "need at least one target");
            run.begin(echo, to_json(s).dump(), std::nullopt);
            run_hook_frontier(run, s, taus, tau_count);
        }
        run.finish();
    } catch (const ConfigError& e) {
        report_error(err, out_dir, exit_config, "config", e.what(), e.field());
        return exit_config;
    } catch (const InvalidInput& e) {
        report_error(err, out_dir, exit_config, "invalid_input", e.what(), "");
        return exit_config;
    } catch (const NonConvergence& e) {
        run.finish();
        report_error(err, out_dir, exit_not_converged, "not_converged", e.what(), "");
        return exit_not_converged;
    } catch (const NoFeasibleRoute& e) {
        report_error(err, out_dir, exit_infeasible, "infeasible", e.what(), "");
        return exit_infeasible;
    } catch (const std::exception& e) {
        report_error(err, out_dir, exit_failure, "internal", e.what(), "");
        return exit_failure;
    }
    return exit_ok;
}

} // namespace hookroute
