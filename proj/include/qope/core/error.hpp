#pragma once

#include <stdexcept>
#include <string>

namespace qope {

// Invalid configuration (bad flag values, inconsistent estimator settings).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data (CSV parse failures, shape mismatches).
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller broke an API precondition (stage mismatch, missing cache, ...).
class ContractError : public std::logic_error {
public:
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Numerical failure with no usable result (diverged training, empty kink set).
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qope
