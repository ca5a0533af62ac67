#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <optional>
#include <string>

#include "magloop/jet.hpp"

namespace magloop {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Scalar field on the chart, evaluated on jets so derivatives come for free.
using ScalarField = std::function<Jet(const Jet& x, const Jet& y)>;

/// Finite-difference step for non-warped Christoffel symbols.
inline constexpr double kGeometryStep = 1e-5;

/// Metric, 1-form and their first two derivatives at one point.
///
/// dG[k] is the partial of G in coordinate k, ddG[k][l] the mixed second
/// partial; likewise for theta.
struct LocalGeometry {
  Vec2 q;
  Mat2 G;
  Mat2 Ginv;
  std::array<Mat2, 2> dG;
  std::array<std::array<Mat2, 2>, 2> ddG;
  Vec2 theta;
  std::array<Vec2, 2> dtheta;
  std::array<std::array<Vec2, 2>, 2> ddtheta;

  double det() const { return G.determinant(); }
  /// Component b of d(theta) = b dx^dy.
  double b() const { return dtheta[0](1) - dtheta[1](0); }
};

/// Cylinder R x R/Z with a metric given by three component functions.
class SurfaceChart {
 public:
  SurfaceChart(ScalarField g11, ScalarField g12, ScalarField g22, std::string description);

  /// g = dx^2 + beta(x)^2 dy^2. beta is evaluated with y held constant.
  static SurfaceChart warped(ScalarField beta, std::string description);

  bool is_warped() const { return static_cast<bool>(beta_); }
  const std::string& description() const { return description_; }

  /// Throws DegenerateMetric unless g11 > 0 and det g > 0.
  std::array<Jet, 3> metric_jets(const Vec2& q) const;
  Mat2 metric(const Vec2& q) const;
  Jet beta(const Vec2& q) const;

 private:
  ScalarField g11_, g12_, g22_;
  ScalarField beta_;
  std::string description_;
};

/// A chart plus the magnetic potential theta = theta1 dx + theta2 dy.
class MagneticSystem {
 public:
  MagneticSystem(SurfaceChart chart, ScalarField theta1, ScalarField theta2, std::string description,
                 bool y_symmetric, std::optional<double> theta_sup = std::nullopt);

  const SurfaceChart& chart() const { return chart_; }
  const std::string& description() const { return description_; }
  /// True when metric and theta do not depend on y.
  bool y_symmetric() const { return y_symmetric_; }
  /// Known sup of |theta| over the whole surface, if finite and known.
  std::optional<double> theta_sup() const { return theta_sup_; }

  LocalGeometry local(const Vec2& q) const;
  Vec2 theta(const Vec2& q) const;

  /// Same metric, theta replaced by theta + c dy (a closed form).
  MagneticSystem with_closed_shift(double c) const;
  /// Same metric, theta replaced by -theta.
  MagneticSystem reversed_field() const;

 private:
  SurfaceChart chart_;
  ScalarField theta1_, theta2_;
  std::string description_;
  bool y_symmetric_;
  std::optional<double> theta_sup_;
};

/// Christoffel symbols; gamma[k](i, j) = Gamma^k_ij.
struct Christoffel {
  std::array<Mat2, 2> gamma;
  double operator()(int k, int i, int j) const { return gamma[k](i, j); }
};

/// Closed form for warped charts, central differences of g otherwise.
Christoffel christoffel(const SurfaceChart& chart, const Vec2& q);
/// Christoffel symbols from exact jet derivatives of g.
Christoffel christoffel_exact(const LocalGeometry& geo);

double sectional_curvature(const SurfaceChart& chart, const Vec2& q);

/// Y_q(v), defined by <Y u, w> = Omega(u, w) with Omega = -d(theta).
Vec2 lorentz_force(const MagneticSystem& system, const Vec2& q, const Vec2& v);
Vec2 lorentz_force(const LocalGeometry& geo, const Vec2& v);

struct ThetaNormBounds {
  double theta = 0.0;
  double dtheta = 0.0;
  double grad_dtheta = 0.0;
};

/// Sampled suprema of |theta|, |d theta| and |nabla d theta| over
/// x in [x_min, x_max] (and y in [0, 1) for y-dependent systems).
ThetaNormBounds theta_norm_bounds(const MagneticSystem& system, double x_min, double x_max, int samples);

/// Bump profile a0 * exp(1 - 1/(1 - (x/r0)^2)), zero for |x| >= r0.
Jet bump_profile(const Jet& x, double amplitude, double radius);

MagneticSystem appendix_cylinder();
MagneticSystem flat_cylinder();
MagneticSystem bump_cylinder(double amplitude = 0.5, double radius = 1.0);

/// Looks up a preset by name: appendix-cylinder, flat-cylinder, bump-cylinder.
MagneticSystem make_preset(const std::string& name, double bump_amplitude = 0.5, double bump_radius = 1.0);

/// System from expression strings over x, y.
MagneticSystem make_expression_system(const std::string& g11, const std::string& g12, const std::string& g22,
                                      const std::string& theta1, const std::string& theta2);

}  // namespace magloop
