#pragma once

#include <stdexcept>
#include <string>

namespace rfm {

enum class ErrorCode {
  DegenerateGradient,
  ProjectionFailed,
  DimensionMismatch,
  UnsupportedOrder,
  UnsupportedSideField,
  WrongSide,
  NotOnInterface,
  NotOnBoundary,
  StationaryProblem,
  NoExactSolution,
  EmptySubdomain,
  ZeroRow,
  NumericalBreakdown,
  ZeroDenominator,
  DegenerateCurve,
  InvalidArgument,
  Config,
  Io,
};

const char* to_string(ErrorCode code);

/// Base exception for every failure raised by the library. The code lets
/// callers (and tests) branch on the failure kind without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rfm
