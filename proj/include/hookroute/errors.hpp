#pragma once

#include <stdexcept>
#include <string>

namespace hookroute {

/// Argument outside an operation's precondition (negative trade, bad dimensions, ...).
struct InvalidInput : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

/// Evaluation point outside a function's domain, e.g. a constant-sum pool past its cap.
struct DomainError : std::domain_error
{
    using std::domain_error::domain_error;
};

/// The asset graph has no path from the tendered asset to the requested one.
struct NoFeasibleRoute : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// A configuration file or document failed to parse or validate.
struct ConfigError : std::runtime_error
{
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace hookroute
