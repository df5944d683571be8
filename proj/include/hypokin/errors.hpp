#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hypokin {

enum class ErrorKind {
  Structural,
  NotCanonicalForm,
  HormanderViolation,
  SingularCovariance,
  EmptyInterval,
  InvalidScale,
  NumericalDivergence,
  DatumEvaluationError,
  InsufficientData,
  MissingDerivative,
  InvalidData,
  InvalidConfig,
  IoError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a quadrature intermediate is not finite; carries the offending
/// space-time node (time first, then the state coordinates).
class NumericalDivergence : public Error {
 public:
  NumericalDivergence(const std::string& what, std::vector<double> where)
      : Error(ErrorKind::NumericalDivergence, what), where_(std::move(where)) {}

  const std::vector<double>& where() const noexcept { return where_; }

 private:
  std::vector<double> where_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace hypokin
