#pragma once

// Second-order forward-mode automatic differentiation.
//
// A Jet carries a value, its gradient and its Hessian with respect to up to
// four independent coordinates. Closed-form exact solutions and level sets are
// written once as templates over the scalar type and evaluated on Jets to get
// machine-precision derivatives for forcing, jump and boundary data.

#include "rfm/types.hpp"

#include <Eigen/Core>

#include <cmath>

namespace rfm {

struct Jet {
  using Grad = Eigen::Matrix<double, kMaxDim, 1>;
  using Hess = Eigen::Matrix<double, kMaxDim, kMaxDim>;

  double v = 0.0;
  Grad g = Grad::Zero();
  Hess h = Hess::Zero();

  Jet() = default;
  Jet(double value) : v(value) {}  // NOLINT: implicit constants are intended

  static Jet variable(double value, int axis) {
    Jet j(value);
    j.g[axis] = 1.0;
    return j;
  }

  /// Derivative selected by a multi-index of total order <= 2.
  double derivative(const MultiIndex& m) const;

  Jet& operator+=(const Jet& o) {
    v += o.v;
    g += o.g;
    h += o.h;
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    v -= o.v;
    g -= o.g;
    h -= o.h;
    return *this;
  }
  Jet& operator*=(const Jet& o);
  Jet& operator/=(const Jet& o);
};

/// Applies a scalar function with known first/second derivatives.
inline Jet chain(const Jet& a, double f, double df, double d2f) {
  Jet r;
  r.v = f;
  r.g = df * a.g;
  r.h = df * a.h + d2f * (a.g * a.g.transpose());
  return r;
}

inline Jet operator-(const Jet& a) {
  Jet r;
  r.v = -a.v;
  r.g = -a.g;
  r.h = -a.h;
  return r;
}
inline Jet operator+(Jet a, const Jet& b) { return a += b; }
inline Jet operator-(Jet a, const Jet& b) { return a -= b; }
inline Jet operator+(Jet a, double b) {
  a.v += b;
  return a;
}
inline Jet operator+(double b, Jet a) { return a + b; }
inline Jet operator-(Jet a, double b) {
  a.v -= b;
  return a;
}
inline Jet operator-(double b, const Jet& a) { return -a + b; }

inline Jet operator*(const Jet& a, const Jet& b) {
  Jet r;
  r.v = a.v * b.v;
  r.g = a.v * b.g + b.v * a.g;
  r.h = a.v * b.h + b.v * a.h + a.g * b.g.transpose() + b.g * a.g.transpose();
  return r;
}
inline Jet operator*(Jet a, double s) {
  a.v *= s;
  a.g *= s;
  a.h *= s;
  return a;
}
inline Jet operator*(double s, Jet a) { return a * s; }

inline Jet reciprocal(const Jet& a) {
  const double inv = 1.0 / a.v;
  return chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}
inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
inline Jet operator/(Jet a, double s) { return a * (1.0 / s); }
inline Jet operator/(double s, const Jet& a) { return s * reciprocal(a); }

inline Jet& Jet::operator*=(const Jet& o) { return *this = *this * o; }
inline Jet& Jet::operator/=(const Jet& o) { return *this = *this / o; }

inline Jet exp(const Jet& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e, e);
}
inline Jet log(const Jet& a) { return chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v)); }
inline Jet sin(const Jet& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return chain(a, s, c, -s);
}
inline Jet cos(const Jet& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return chain(a, c, -s, -c);
}
inline Jet tanh(const Jet& a) {
  const double th = std::tanh(a.v), d = 1.0 - th * th;
  return chain(a, th, d, -2.0 * th * d);
}
inline Jet sqrt(const Jet& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}
inline Jet pow(const Jet& a, double p) {
  const double f = std::pow(a.v, p);
  const double df = p * std::pow(a.v, p - 1.0);
  const double d2f = p * (p - 1.0) * std::pow(a.v, p - 2.0);
  return chain(a, f, df, d2f);
}
inline Jet atan(const Jet& a) {
  const double d = 1.0 / (1.0 + a.v * a.v);
  return chain(a, std::atan(a.v), d, -2.0 * a.v * d * d);
}
/// Quadrant-aware arctangent; derivatives are those of atan(y/x).
inline Jet atan2(const Jet& y, const Jet& x) {
  Jet r = std::abs(x.v) >= std::abs(y.v) ? atan(y / x) : -atan(x / y);
  r.v = std::atan2(y.v, x.v);
  return r;
}

inline double Jet::derivative(const MultiIndex& m) const {
  const auto ax = m.axes();
  switch (m.order()) {
    case 0: return v;
    case 1: return g[ax[0]];
    default: return h(ax[0], ax[1]);
  }
}

inline double value_of(double x) { return x; }
inline long double value_of(long double x) { return x; }
inline double value_of(const Jet& x) { return x.v; }

}  // namespace rfm
