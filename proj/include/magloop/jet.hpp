#pragma once

#include <cmath>

namespace magloop {

/// Second-order forward-mode jet in the two chart variables (x, y).
///
/// Carries the value, the gradient and the (symmetric) Hessian of a scalar
/// expression. All metric and 1-form components are written in terms of
/// jets, so first and second derivatives consumed by the action Hessian and
/// the variational equations are exact rather than finite-differenced.
struct Jet {
  double v = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  double dxx = 0.0;
  double dxy = 0.0;
  double dyy = 0.0;

  static constexpr Jet constant(double c) { return Jet{c, 0, 0, 0, 0, 0}; }
  static constexpr Jet var_x(double x) { return Jet{x, 1, 0, 0, 0, 0}; }
  static constexpr Jet var_y(double y) { return Jet{y, 0, 1, 0, 0, 0}; }

  double d(int i) const { return i == 0 ? dx : dy; }
  double dd(int i, int j) const {
    if (i != j) return dxy;
    return i == 0 ? dxx : dyy;
  }
};

/// Applies a scalar function with derivatives f, f', f'' to a jet (chain rule).
inline Jet chain(const Jet& a, double f, double f1, double f2) {
  return Jet{f,
             f1 * a.dx,
             f1 * a.dy,
             f1 * a.dxx + f2 * a.dx * a.dx,
             f1 * a.dxy + f2 * a.dx * a.dy,
             f1 * a.dyy + f2 * a.dy * a.dy};
}

inline Jet operator+(const Jet& a, const Jet& b) {
  return Jet{a.v + b.v, a.dx + b.dx, a.dy + b.dy, a.dxx + b.dxx, a.dxy + b.dxy, a.dyy + b.dyy};
}
inline Jet operator-(const Jet& a, const Jet& b) {
  return Jet{a.v - b.v, a.dx - b.dx, a.dy - b.dy, a.dxx - b.dxx, a.dxy - b.dxy, a.dyy - b.dyy};
}
inline Jet operator-(const Jet& a) { return Jet{-a.v, -a.dx, -a.dy, -a.dxx, -a.dxy, -a.dyy}; }
inline Jet operator*(const Jet& a, const Jet& b) {
  return Jet{a.v * b.v,
             a.dx * b.v + a.v * b.dx,
             a.dy * b.v + a.v * b.dy,
             a.dxx * b.v + 2 * a.dx * b.dx + a.v * b.dxx,
             a.dxy * b.v + a.dx * b.dy + a.dy * b.dx + a.v * b.dxy,
             a.dyy * b.v + 2 * a.dy * b.dy + a.v * b.dyy};
}
inline Jet operator*(double s, const Jet& a) {
  return Jet{s * a.v, s * a.dx, s * a.dy, s * a.dxx, s * a.dxy, s * a.dyy};
}
inline Jet operator*(const Jet& a, double s) { return s * a; }
inline Jet operator+(const Jet& a, double s) { return Jet{a.v + s, a.dx, a.dy, a.dxx, a.dxy, a.dyy}; }
inline Jet operator+(double s, const Jet& a) { return a + s; }
inline Jet operator-(const Jet& a, double s) { return a + (-s); }
inline Jet operator-(double s, const Jet& a) { return (-a) + s; }

inline Jet reciprocal(const Jet& a) {
  const double r = 1.0 / a.v;
  return chain(a, r, -r * r, 2 * r * r * r);
}
inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
inline Jet operator/(const Jet& a, double s) { return (1.0 / s) * a; }
inline Jet operator/(double s, const Jet& a) { return s * reciprocal(a); }

inline Jet exp(const Jet& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e, e);
}
inline Jet log(const Jet& a) { return chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v)); }
inline Jet sin(const Jet& a) {
  const double s = std::sin(a.v);
  return chain(a, s, std::cos(a.v), -s);
}
inline Jet cos(const Jet& a) {
  const double c = std::cos(a.v);
  return chain(a, c, -std::sin(a.v), -c);
}
inline Jet sqrt(const Jet& a) {
  const double r = std::sqrt(a.v);
  return chain(a, r, 0.5 / r, -0.25 / (r * a.v));
}
inline Jet tanh(const Jet& a) {
  const double t = std::tanh(a.v);
  const double s = 1 - t * t;
  return chain(a, t, s, -2 * t * s);
}
inline Jet cosh(const Jet& a) { return chain(a, std::cosh(a.v), std::sinh(a.v), std::cosh(a.v)); }
inline Jet sinh(const Jet& a) { return chain(a, std::sinh(a.v), std::cosh(a.v), std::sinh(a.v)); }

/// Real power a^p. Integer exponents are exact for negative bases.
inline Jet pow(const Jet& a, double p) {
  if (p == 0.0) return Jet::constant(1.0);
  if (p == 1.0) return a;
  if (p == 2.0) return a * a;
  const double f = std::pow(a.v, p);
  const double f1 = p * std::pow(a.v, p - 1);
  const double f2 = p * (p - 1) * std::pow(a.v, p - 2);
  return chain(a, f, f1, f2);
}

}  // namespace magloop
