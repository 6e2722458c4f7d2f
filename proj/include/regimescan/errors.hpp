#pragma once

#include <stdexcept>
#include <string>

namespace regimescan {

// Bad arguments, malformed files, inconsistent configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files; carries whatever location info the parser has.
class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Optimization or integration produced non-finite values. CLI exit code 3.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationError : public TrainingError {
 public:
  using TrainingError::TrainingError;
};

// Window least-squares system is numerically singular.
class IdentifiabilityError : public TrainingError {
 public:
  using TrainingError::TrainingError;
};

}  // namespace regimescan
