#pragma once

#include <stdexcept>
#include <string>

namespace tdps {

// Broken caller contract (bad shapes, out-of-range indices, wrong estimator
// kind). These indicate programming errors rather than bad input data.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Base for recoverable runtime failures. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class ScenarioError : public Error {
 public:
  using Error::Error;
};

class IngestionError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) {
    throw ContractViolation(message);
  }
}

}  // namespace tdps
