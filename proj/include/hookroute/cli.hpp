#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hookroute {

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_config = 2,
    exit_not_converged = 3,
    exit_infeasible = 4,
};

inline constexpr const char* toolkit_version = "0.1.0";

/// `start:stop:count`, endpoints inclusive. Throws ConfigError("grid") on bad syntax.
std::vector<double> parse_grid(const std::string& spec, const std::string& field = "grid");

std::uint64_t fnv1a(std::string_view data);

/// Writes `<csv_path>.gp` for a recognized column layout; false (and a warning on `warn`) otherwise.
bool emit_gnuplot_stub(const std::string& csv_path, std::ostream& warn);

/// Entry point of the `hookroute` tool. Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace hookroute
