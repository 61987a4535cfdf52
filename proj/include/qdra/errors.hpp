#pragma once

#include <stdexcept>
#include <string>

namespace qdra {

// Shape or dimensionality violation in a tensor op.
struct DimError : std::runtime_error {
  explicit DimError(const std::string& msg) : std::runtime_error("dimension error: " + msg) {}
};

// NaN/Inf or other numeric breakdown.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

// Malformed input file.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error("parse error: " + msg) {}
};

// Invalid configuration value.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

// API precondition violated by the caller.
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error("contract error: " + msg) {}
};

}  // namespace qdra
