#pragma once

#include <stdexcept>
#include <string>

namespace mxl {

// Input violates a mathematical precondition (non-Hermitian, infeasible, non-finite).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Matrix dimensions do not fit together.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid solver, schedule, scenario or game parameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Iteration produced non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mxl
