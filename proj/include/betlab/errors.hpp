#pragma once

#include <stdexcept>
#include <string>

namespace betlab {

// Betting against a goal nothing can satisfy (optimal value 0).
struct UnsatisfiableGoalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Conditioning on a history the environment assigns probability zero.
struct ConditioningError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structural-model evidence with no consistent exogenous noise value.
struct AbductionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Enumeration request past a configured depth/size cap.
struct ResourceLimitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear solve on a matrix that is singular beyond tolerance.
struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed manifest or policy/evaluation configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace betlab
