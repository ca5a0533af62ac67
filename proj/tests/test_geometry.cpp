#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "magloop/errors.hpp"
#include "magloop/expression.hpp"
#include "magloop/geometry.hpp"

using namespace magloop;

namespace {

// Christoffel symbols from a hand-coded metric by nested central differences.
using MetricFn = std::function<Mat2(double, double)>;

Christoffel christoffel_oracle(const MetricFn& g, double x, double y) {
  const double h = 1e-5;
  std::array<Mat2, 2> dg = {(g(x + h, y) - g(x - h, y)) / (2 * h), (g(x, y + h) - g(x, y - h)) / (2 * h)};
  const Mat2 ginv = g(x, y).inverse();
  Christoffel c;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double s = 0;
        for (int l = 0; l < 2; ++l) s += 0.5 * ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
        c.gamma[k](i, j) = s;
      }
  return c;
}

Mat2 appendix_metric(double x, double) {
  const double b = 1 + std::exp(x);
  return (Mat2() << 1, 0, 0, b * b).finished();
}

}  // namespace

TEST(Christoffel, WarpedClosedFormMatchesOracle) {
  const auto sys = appendix_cylinder();
  for (double x : {-3.0, -0.5, 0.0, 1.2}) {
    const auto c = christoffel(sys.chart(), {x, 0.3});
    const auto o = christoffel_oracle(appendix_metric, x, 0.3);
    const double b = 1 + std::exp(x), bp = std::exp(x);
    EXPECT_NEAR(c(0, 1, 1), -b * bp, 1e-12);
    EXPECT_NEAR(c(1, 0, 1), bp / b, 1e-12);
    EXPECT_NEAR(c(1, 1, 0), bp / b, 1e-12);
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(c(k, i, j), o(k, i, j), 1e-6 * (1 + std::abs(o(k, i, j))));
  }
}

TEST(Christoffel, FiniteDifferenceMatchesJets) {
  const auto sys = make_expression_system("1 + 0.2*sin(2*pi*y)*exp(-x^2)", "0.1*x*cos(2*pi*y)", "2 + tanh(x)", "0",
                                          "0");
  const MetricFn g = [](double x, double y) {
    return (Mat2() << 1 + 0.2 * std::sin(2 * M_PI * y) * std::exp(-x * x), 0.1 * x * std::cos(2 * M_PI * y),
            0.1 * x * std::cos(2 * M_PI * y), 2 + std::tanh(x))
        .finished();
  };
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(-2, 2), uy(0, 1);
  for (int t = 0; t < 20; ++t) {
    const Vec2 q(ux(rng), uy(rng));
    const auto fd = christoffel(sys.chart(), q);
    const auto ex = christoffel_exact(sys.local(q));
    const auto o = christoffel_oracle(g, q.x(), q.y());
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          EXPECT_NEAR(fd(k, i, j), ex(k, i, j), 1e-8);
          EXPECT_NEAR(ex(k, i, j), o(k, i, j), 1e-6);
          EXPECT_DOUBLE_EQ(ex(k, i, j), ex(k, j, i));
        }
  }
}

TEST(Curvature, WarpedAndBrioschiAgree) {
  const auto sys = appendix_cylinder();
  for (double x : {-2.0, 0.0, 1.5}) {
    const double e = std::exp(x);
    EXPECT_NEAR(sectional_curvature(sys.chart(), {x, 0}), -e / (1 + e), 1e-12);
  }
  // Same warped metric through the general (non-warped) route.
  const auto gen = make_expression_system("1", "0", "(1 + exp(x))^2", "0", "0");
  for (double x : {-2.0, 0.0, 1.5}) {
    const double e = std::exp(x);
    EXPECT_NEAR(sectional_curvature(gen.chart(), {x, 0.4}), -e / (1 + e), 1e-8);
  }
  const auto hyp = make_expression_system("1", "0", "cosh(x)^2", "0", "0");
  EXPECT_NEAR(sectional_curvature(hyp.chart(), {0.7, 0.1}), -1.0, 1e-8);
  EXPECT_NEAR(sectional_curvature(flat_cylinder().chart(), {0.7, 0.1}), 0.0, 1e-14);
}

TEST(Curvature, ConformalSphereChart) {
  // g = (dx^2 + dy^2) / cosh(x)^2 is the round unit sphere in Mercator form.
  const auto s = make_expression_system("1/cosh(x)^2", "0", "1/cosh(x)^2", "0", "0");
  for (double x : {-1.0, 0.0, 0.8}) EXPECT_NEAR(sectional_curvature(s.chart(), {x, 0.2}), 1.0, 1e-7);
}

TEST(LorentzForce, SkewAndScaled) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  const auto sys = make_expression_system("1 + 0.3*x^2", "0.2", "2 + sin(2*pi*y)", "y*x", "exp(-x^2) + 0.3*x");
  for (int t = 0; t < 50; ++t) {
    const Vec2 q(n01(rng), n01(rng));
    const Vec2 v(n01(rng), n01(rng));
    const auto geo = sys.local(q);
    const Vec2 yv = lorentz_force(geo, v);
    EXPECT_NEAR(v.dot(geo.G * yv), 0.0, 1e-12 * (1 + v.squaredNorm()));
    const double nv = std::sqrt(v.dot(geo.G * v));
    const double ny = std::sqrt(yv.dot(geo.G * yv));
    EXPECT_NEAR(ny, std::abs(geo.b()) / std::sqrt(geo.det()) * nv, 1e-10 * (1 + nv));
  }
}

TEST(LorentzForce, AppendixFieldStrength) {
  // theta = beta dy with beta = 1 + e^x: d theta = e^x dx^dy and |d theta|_g = e^x / beta.
  const auto sys = appendix_cylinder();
  const auto geo = sys.local({0.5, 0});
  EXPECT_NEAR(geo.b(), std::exp(0.5), 1e-14);
  const Vec2 u(1, 0);
  const Vec2 yu = lorentz_force(geo, u);
  // Y u is g-orthogonal to u with the same norm scaled by |b| / sqrt(det g).
  EXPECT_NEAR(yu.x(), 0.0, 1e-14);
  const double beta = 1 + std::exp(0.5);
  EXPECT_NEAR(std::abs(yu.y()) * beta, std::exp(0.5) / beta, 1e-12);
}

TEST(Metric, DegenerateRejected) {
  const auto s = make_expression_system("x", "0", "1", "0", "0");
  try {
    s.local({-1.0, 0.0});
    FAIL() << "expected DegenerateMetric";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateMetric);
  }
  const auto t = make_expression_system("1", "2", "1", "0", "0");
  EXPECT_THROW(t.local({0.0, 0.0}), Error);
}

TEST(Expression, ParsesAndDifferentiates) {
  const auto e = Expression::parse("3*x^2*y - exp(-x) / 2 + sin(pi*y)");
  const Jet j = e.eval(0.5, 0.25);
  EXPECT_NEAR(j.v, 3 * 0.25 * 0.25 - std::exp(-0.5) / 2 + std::sin(M_PI * 0.25), 1e-14);
  EXPECT_NEAR(j.dx, 6 * 0.5 * 0.25 + std::exp(-0.5) / 2, 1e-14);
  EXPECT_NEAR(j.dy, 3 * 0.25 + M_PI * std::cos(M_PI * 0.25), 1e-14);
  EXPECT_NEAR(j.dxy, 6 * 0.5, 1e-14);
  EXPECT_NEAR(j.dyy, -M_PI * M_PI * std::sin(M_PI * 0.25), 1e-13);
  EXPECT_TRUE(e.depends_on_y());
  EXPECT_FALSE(Expression::parse("cosh(x)^2").depends_on_y());
  EXPECT_NEAR(Expression::parse("-2^2").eval(0, 0).v, -4.0, 0);
  EXPECT_NEAR(Expression::parse("2^3^2").eval(0, 0).v, 512.0, 0);
}

TEST(Expression, ErrorsCarryColumn) {
  for (const char* bad : {"1 +", "foo(x)", "x * (y", "2 $ 3", ""}) {
    try {
      Expression::parse(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Config) << bad;
    }
  }
  try {
    Expression::parse("x + foo");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("column 5"), std::string::npos) << e.what();
  }
}

TEST(Bump, ProfileSupportAndPeak) {
  EXPECT_DOUBLE_EQ(bump_profile(Jet::var_x(0.0), 0.5, 1.0).v, 0.5);
  for (double x : {-1.0, 1.0, 1.5, -3.0}) {
    const Jet j = bump_profile(Jet::var_x(x), 0.5, 1.0);
    EXPECT_EQ(j.v, 0.0);
    EXPECT_EQ(j.dx, 0.0);
    EXPECT_EQ(j.dxx, 0.0);
  }
  // Flat to all orders at the edge: values tiny just inside.
  EXPECT_LT(bump_profile(Jet::var_x(0.99), 0.5, 1.0).v, 1e-20);
  const auto sys = bump_cylinder();
  EXPECT_EQ(sys.theta_sup().value(), 0.5);
  EXPECT_NEAR(sys.theta({0.3, 0.0}).y(), 0.5 * std::exp(1 - 1 / (1 - 0.09)), 1e-15);
  EXPECT_EQ(sectional_curvature(sys.chart(), {0.3, 0}), 0.0);
}

TEST(Presets, ThetaBoundsAndShifts) {
  const auto app = appendix_cylinder();
  const auto b = theta_norm_bounds(app, -5, 0, 200);
  // |theta|_g = beta / beta = 1 everywhere.
  EXPECT_NEAR(b.theta, 1.0, 1e-12);
  EXPECT_NEAR(b.dtheta, 0.5, 1e-2);  // e^x / beta^... peaks at x = 0
  const auto flat = flat_cylinder().with_closed_shift(0.25);
  EXPECT_NEAR(flat.theta({1.0, 0.3}).y(), 0.25, 0);
  EXPECT_EQ(flat.local({1.0, 0.3}).b(), 0.0);
  const auto rev = app.reversed_field();
  EXPECT_NEAR(rev.theta({0.0, 0.0}).y(), -2.0, 1e-15);
  EXPECT_THROW(make_preset("torus"), Error);
  EXPECT_TRUE(app.y_symmetric());
}
