#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mccov {

// Bad numeric preconditions (weights <= 0, |rho| >= 1, empty input, ...).
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inconsistent shapes, unresolved identifiers, malformed structures.
class StructuralError : public std::runtime_error {
 public:
  explicit StructuralError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or failed factorizations during evaluation.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input data failing validation; carries one message per offending row.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& msg, std::vector<std::string> rows)
      : std::runtime_error(msg + " (" + std::to_string(rows.size()) + " problem(s))"),
        row_errors(std::move(rows)) {}
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}

  std::vector<std::string> row_errors;
};

// Collected non-fatal notices (duplicate rows merged, clamped cells, ...).
struct Diagnostics {
  std::vector<std::string> warnings;
  std::size_t dropped_cohort_records = 0;
  std::size_t clamped_likelihood_cells = 0;
  std::size_t ignored_population_rows = 0;

  void warn(std::string msg) { warnings.push_back(std::move(msg)); }
};

}  // namespace mccov
