#pragma once

#include <stdexcept>
#include <string>

namespace specfuse {

// User-facing input problems: bad shapes, missing files, invalid config.
// The CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatches between arrays that should have been compatible.
class ShapeError : public ConfigError {
public:
    explicit ShapeError(const std::string& msg) : ConfigError(msg) {}
};

// Numerical breakdown during optimization (NaN/Inf loss or gradients).
// The CLI maps these to exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace specfuse
