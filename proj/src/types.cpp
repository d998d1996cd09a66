#include "rfm/errors.hpp"
#include "rfm/types.hpp"

namespace rfm {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateGradient: return "DegenerateGradient";
    case ErrorCode::ProjectionFailed: return "ProjectionFailed";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::UnsupportedSideField: return "UnsupportedSideField";
    case ErrorCode::WrongSide: return "WrongSide";
    case ErrorCode::NotOnInterface: return "NotOnInterface";
    case ErrorCode::NotOnBoundary: return "NotOnBoundary";
    case ErrorCode::StationaryProblem: return "StationaryProblem";
    case ErrorCode::NoExactSolution: return "NoExactSolution";
    case ErrorCode::EmptySubdomain: return "EmptySubdomain";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::DegenerateCurve: return "DegenerateCurve";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::Io: return "IoError";
  }
  return "Unknown";
}

const char* to_string(Side s) { return s == Side::One ? "one" : "two"; }

const char* to_string(Subdomain s) {
  switch (s) {
    case Subdomain::One: return "one";
    case Subdomain::Two: return "two";
    case Subdomain::Outside: return "outside";
  }
  return "?";
}

std::array<int, 2> MultiIndex::axes() const {
  std::array<int, 2> out{-1, -1};
  int k = 0;
  for (int a = 0; a < kMaxDim; ++a)
    for (int c = 0; c < alpha[a] && k < 2; ++c) out[k++] = a;
  return out;
}

std::string to_string(const MultiIndex& m) {
  std::string s = "d";
  for (int a = 0; a < kMaxDim; ++a)
    for (int c = 0; c < m.alpha[a]; ++c) s += static_cast<char>('0' + a);
  return m.order() == 0 ? "value" : s;
}

}  // namespace rfm
