#pragma once

#include <stdexcept>
#include <string>

namespace binq {

// Invalid construction-time configuration (layer sizes, hyperparameter ranges).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension mismatch between vectors/matrices that should agree.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller broke an operation contract (bad action mask, out-of-range action,
// stepping a finished episode, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// NaN/Inf reached a value that must stay finite. Never clamped; always thrown.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rejected maze text; row/col are 1-based, -1 when not applicable.
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, int row_ = -1, int col_ = -1)
      : std::runtime_error(msg), row(row_), col(col_) {}
  int row;
  int col;
};

}  // namespace binq
