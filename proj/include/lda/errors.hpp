#pragma once

#include <stdexcept>
#include <string>

namespace lda {

// Error taxonomy mapped to CLI exit codes:
//   ConfigError -> 2, DataError -> 3, NumericsError -> 4, ConvergenceError -> 5.

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Grid too small, tail mass too large, singular recursion, domain violations
// discovered mid-computation, non-PSD matrices beyond repair, ...
class NumericsError : public std::runtime_error {
public:
    explicit NumericsError(const std::string& msg) : std::runtime_error(msg) {}
};

// Optimizer / MCMC tuning failures.
class ConvergenceError : public std::runtime_error {
public:
    explicit ConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace lda
