#ifndef KINN_ERRORS_HPP
#define KINN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kinn {

/// Bad configuration or usage. CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical or model failure (divergence, non-stationarity, ...). Exit code 2.
class ComputeError : public std::runtime_error {
public:
    explicit ComputeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem problem (unreadable, unwritable, corrupt). Exit code 3.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace kinn

#endif // KINN_ERRORS_HPP
