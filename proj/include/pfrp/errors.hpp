#pragma once

#include <stdexcept>
#include <string>

namespace pfrp {

// Bad user configuration or CLI usage (exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unusable input data: missing files, malformed CSV, degenerate series (exit code 3).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure during training or inference, e.g. non-finite loss (exit code 4).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pfrp
