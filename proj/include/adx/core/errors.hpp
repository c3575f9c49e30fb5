#pragma once

#include <stdexcept>
#include <string>

namespace adx {

// Bad model/config input: malformed JSON, violated invariants, unsupported family.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric failure: quadrature non-convergence, iteration caps, infeasible flows.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what, double achieved = 0.0)
        : std::runtime_error(what), achieved_tolerance(achieved) {}
    double achieved_tolerance;
};

} // namespace adx
