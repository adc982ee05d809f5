#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qportfolio {

/// Argument outside the mathematical domain of an operation (t >= T, x <= 0, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base for failures of a numerical method on valid input. The CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite state produced by an SDE integration.
class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, std::size_t step, std::size_t path = npos)
      : NumericalError(what), step_(step), path_(path) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t step() const noexcept { return step_; }
  std::size_t path() const noexcept { return path_; }

 private:
  std::size_t step_;
  std::size_t path_;
};

/// Finite-difference scheme failure: step size over the stability bound, negative density.
class SchemeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A test oracle (quadrature) failed to converge.
class OracleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Scenario validation failure carrying every issue found, one message per field.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out;
    for (const auto& issue : issues) {
      if (!out.empty()) out += "; ";
      out += issue;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

}  // namespace qportfolio
