#include "magloop/geometry.hpp"

#include <cmath>
#include <sstream>

#include "magloop/errors.hpp"
#include "magloop/expression.hpp"

namespace magloop {

namespace {

void check_metric(double g11, double g12, double g22, const Vec2& q) {
  const double det = g11 * g22 - g12 * g12;
  if (!(g11 > 0.0) || !(det > 0.0)) {
    std::ostringstream os;
    os << "metric not positive definite at (" << q.x() << ", " << q.y() << "): g11=" << g11 << " det=" << det;
    throw Error(ErrorKind::DegenerateMetric, os.str());
  }
}

Mat2 sym(double a, double b, double c) {
  Mat2 m;
  m << a, b, b, c;
  return m;
}

Christoffel christoffel_from_derivatives(const Mat2& Ginv, const std::array<Mat2, 2>& dG) {
  Christoffel c;
  for (int k = 0; k < 2; ++k) {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        double s = 0.0;
        for (int l = 0; l < 2; ++l) s += Ginv(k, l) * (dG[i](l, j) + dG[j](l, i) - dG[l](i, j));
        c.gamma[k](i, j) = 0.5 * s;
      }
    }
  }
  return c;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

SurfaceChart::SurfaceChart(ScalarField g11, ScalarField g12, ScalarField g22, std::string description)
    : g11_(std::move(g11)), g12_(std::move(g12)), g22_(std::move(g22)), description_(std::move(description)) {}

SurfaceChart SurfaceChart::warped(ScalarField beta, std::string description) {
  auto one = [](const Jet&, const Jet&) { return Jet::constant(1.0); };
  auto zero = [](const Jet&, const Jet&) { return Jet::constant(0.0); };
  auto g22 = [beta](const Jet& x, const Jet& y) {
    const Jet b = beta(x, y);
    return b * b;
  };
  SurfaceChart chart(one, zero, g22, std::move(description));
  chart.beta_ = std::move(beta);
  return chart;
}

std::array<Jet, 3> SurfaceChart::metric_jets(const Vec2& q) const {
  const Jet x = Jet::var_x(q.x());
  const Jet y = Jet::var_y(q.y());
  std::array<Jet, 3> g{g11_(x, y), g12_(x, y), g22_(x, y)};
  check_metric(g[0].v, g[1].v, g[2].v, q);
  return g;
}

Mat2 SurfaceChart::metric(const Vec2& q) const {
  const auto g = metric_jets(q);
  return sym(g[0].v, g[1].v, g[2].v);
}

Jet SurfaceChart::beta(const Vec2& q) const {
  if (!beta_) throw Error(ErrorKind::InvalidArgument, "chart is not warped");
  return beta_(Jet::var_x(q.x()), Jet::var_y(q.y()));
}

MagneticSystem::MagneticSystem(SurfaceChart chart, ScalarField theta1, ScalarField theta2, std::string description,
                               bool y_symmetric, std::optional<double> theta_sup)
    : chart_(std::move(chart)),
      theta1_(std::move(theta1)),
      theta2_(std::move(theta2)),
      description_(std::move(description)),
      y_symmetric_(y_symmetric),
      theta_sup_(theta_sup) {}

LocalGeometry MagneticSystem::local(const Vec2& q) const {
  const auto g = chart_.metric_jets(q);
  const Jet x = Jet::var_x(q.x());
  const Jet y = Jet::var_y(q.y());
  const Jet t1 = theta1_(x, y);
  const Jet t2 = theta2_(x, y);

  LocalGeometry geo;
  geo.q = q;
  geo.G = sym(g[0].v, g[1].v, g[2].v);
  geo.Ginv = geo.G.inverse();
  geo.theta = Vec2(t1.v, t2.v);
  for (int k = 0; k < 2; ++k) {
    geo.dG[k] = sym(g[0].d(k), g[1].d(k), g[2].d(k));
    geo.dtheta[k] = Vec2(t1.d(k), t2.d(k));
    for (int l = 0; l < 2; ++l) {
      geo.ddG[k][l] = sym(g[0].dd(k, l), g[1].dd(k, l), g[2].dd(k, l));
      geo.ddtheta[k][l] = Vec2(t1.dd(k, l), t2.dd(k, l));
    }
  }
  return geo;
}

Vec2 MagneticSystem::theta(const Vec2& q) const {
  const Jet x = Jet::constant(q.x());
  const Jet y = Jet::constant(q.y());
  return Vec2(theta1_(x, y).v, theta2_(x, y).v);
}

MagneticSystem MagneticSystem::with_closed_shift(double c) const {
  ScalarField t2 = [base = theta2_, c](const Jet& x, const Jet& y) { return base(x, y) + c; };
  return MagneticSystem(chart_, theta1_, std::move(t2), description_ + ";shift=" + format_double(c), y_symmetric_);
}

MagneticSystem MagneticSystem::reversed_field() const {
  ScalarField t1 = [base = theta1_](const Jet& x, const Jet& y) { return -base(x, y); };
  ScalarField t2 = [base = theta2_](const Jet& x, const Jet& y) { return -base(x, y); };
  return MagneticSystem(chart_, std::move(t1), std::move(t2), description_ + ";reversed", y_symmetric_, theta_sup_);
}

Christoffel christoffel(const SurfaceChart& chart, const Vec2& q) {
  if (chart.is_warped()) {
    chart.metric_jets(q);
    const Jet b = chart.beta(q);
    Christoffel c;
    c.gamma[0].setZero();
    c.gamma[1].setZero();
    c.gamma[0](1, 1) = -b.v * b.dx;
    c.gamma[1](0, 1) = c.gamma[1](1, 0) = b.dx / b.v;
    return c;
  }
  const Mat2 G = chart.metric(q);
  std::array<Mat2, 2> dG;
  for (int k = 0; k < 2; ++k) {
    Vec2 e = Vec2::Zero();
    e(k) = kGeometryStep;
    dG[k] = (chart.metric(q + e) - chart.metric(q - e)) / (2.0 * kGeometryStep);
  }
  return christoffel_from_derivatives(G.inverse(), dG);
}

Christoffel christoffel_exact(const LocalGeometry& geo) { return christoffel_from_derivatives(geo.Ginv, geo.dG); }

double sectional_curvature(const SurfaceChart& chart, const Vec2& q) {
  if (chart.is_warped()) {
    chart.metric_jets(q);
    const Jet b = chart.beta(q);
    return -b.dxx / b.v;
  }
  // Brioschi formula with E = g11, F = g12, G = g22 and (u, v) = (x, y).
  const auto g = chart.metric_jets(q);
  const Jet& E = g[0];
  const Jet& F = g[1];
  const Jet& G = g[2];
  Eigen::Matrix3d A;
  A << -0.5 * E.dyy + F.dxy - 0.5 * G.dxx, 0.5 * E.dx, F.dx - 0.5 * E.dy,
      F.dy - 0.5 * G.dx, E.v, F.v,
      0.5 * G.dy, F.v, G.v;
  Eigen::Matrix3d B;
  B << 0.0, 0.5 * E.dy, 0.5 * G.dx,
      0.5 * E.dy, E.v, F.v,
      0.5 * G.dx, F.v, G.v;
  const double det = E.v * G.v - F.v * F.v;
  return (A.determinant() - B.determinant()) / (det * det);
}

Vec2 lorentz_force(const LocalGeometry& geo, const Vec2& v) {
  const double b = geo.b();
  return geo.Ginv * Vec2(b * v.y(), -b * v.x());
}

Vec2 lorentz_force(const MagneticSystem& system, const Vec2& q, const Vec2& v) {
  return lorentz_force(system.local(q), v);
}

ThetaNormBounds theta_norm_bounds(const MagneticSystem& system, double x_min, double x_max, int samples) {
  if (samples < 1) throw Error(ErrorKind::InvalidArgument, "theta_norm_bounds needs at least one sample");
  const int ny = system.y_symmetric() ? 1 : 16;
  auto field = [&](const Vec2& q) {
    const LocalGeometry geo = system.local(q);
    return geo.b() / std::sqrt(geo.det());
  };
  ThetaNormBounds out;
  for (int i = 0; i < samples; ++i) {
    const double x = samples == 1 ? x_min : x_min + (x_max - x_min) * i / (samples - 1);
    for (int j = 0; j < ny; ++j) {
      const Vec2 q(x, static_cast<double>(j) / ny);
      const LocalGeometry geo = system.local(q);
      out.theta = std::max(out.theta, std::sqrt(geo.theta.dot(geo.Ginv * geo.theta)));
      out.dtheta = std::max(out.dtheta, std::abs(geo.b()) / std::sqrt(geo.det()));
      Vec2 df;
      for (int k = 0; k < 2; ++k) {
        Vec2 e = Vec2::Zero();
        e(k) = kGeometryStep;
        df(k) = (field(q + e) - field(q - e)) / (2.0 * kGeometryStep);
      }
      out.grad_dtheta = std::max(out.grad_dtheta, std::sqrt(df.dot(geo.Ginv * df)));
    }
  }
  return out;
}

Jet bump_profile(const Jet& x, double amplitude, double radius) {
  const Jet s = x / radius;
  const Jet u = 1.0 - s * s;
  // exp(1 - 600) underflows to zero anyway; skip the jet arithmetic there.
  if (u.v <= 1.0 / 600.0) return Jet::constant(0.0);
  return amplitude * exp(1.0 - reciprocal(u));
}

MagneticSystem appendix_cylinder() {
  auto beta = [](const Jet& x, const Jet&) { return 1.0 + exp(x); };
  auto zero = [](const Jet&, const Jet&) { return Jet::constant(0.0); };
  return MagneticSystem(SurfaceChart::warped(beta, "warped beta=1+exp(x)"), zero, beta, "preset=appendix-cylinder",
                        true, 1.0);
}

MagneticSystem flat_cylinder() {
  auto one = [](const Jet&, const Jet&) { return Jet::constant(1.0); };
  auto zero = [](const Jet&, const Jet&) { return Jet::constant(0.0); };
  return MagneticSystem(SurfaceChart::warped(one, "flat"), zero, zero, "preset=flat-cylinder", true, 0.0);
}

MagneticSystem bump_cylinder(double amplitude, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "bump radius must be positive");
  auto one = [](const Jet&, const Jet&) { return Jet::constant(1.0); };
  auto zero = [](const Jet&, const Jet&) { return Jet::constant(0.0); };
  auto a = [amplitude, radius](const Jet& x, const Jet&) { return bump_profile(x, amplitude, radius); };
  return MagneticSystem(SurfaceChart::warped(one, "flat"), zero, a,
                        "preset=bump-cylinder;amplitude=" + format_double(amplitude) +
                            ";radius=" + format_double(radius),
                        true, std::abs(amplitude));
}

MagneticSystem make_preset(const std::string& name, double bump_amplitude, double bump_radius) {
  if (name == "appendix-cylinder") return appendix_cylinder();
  if (name == "flat-cylinder") return flat_cylinder();
  if (name == "bump-cylinder") return bump_cylinder(bump_amplitude, bump_radius);
  throw Error(ErrorKind::Config, "unknown preset '" + name + "'");
}

MagneticSystem make_expression_system(const std::string& g11, const std::string& g12, const std::string& g22,
                                      const std::string& theta1, const std::string& theta2) {
  const Expression e11 = Expression::parse(g11);
  const Expression e12 = Expression::parse(g12);
  const Expression e22 = Expression::parse(g22);
  const Expression t1 = Expression::parse(theta1);
  const Expression t2 = Expression::parse(theta2);
  const bool symmetric = !(e11.depends_on_y() || e12.depends_on_y() || e22.depends_on_y() ||
                           t1.depends_on_y() || t2.depends_on_y());
  SurfaceChart chart(e11, e12, e22, "g11=" + g11 + ";g12=" + g12 + ";g22=" + g22);
  return MagneticSystem(std::move(chart), t1, t2,
                        "g11=" + g11 + ";g12=" + g12 + ";g22=" + g22 + ";theta1=" + theta1 + ";theta2=" + theta2,
                        symmetric);
}

}  // namespace magloop
