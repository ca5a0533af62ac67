#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "magloop/errors.hpp"
#include "magloop/solver.hpp"

using namespace magloop;

TEST(PeriodBounds, Formulae) {
  const auto b = period_bounds(1.0, 3.0, 2.0, 0.5, 0.25, 1.0);
  EXPECT_NEAR(b.delta, 2 * 4.0 / (4.0 + 12.0 + 1.0), 1e-15);
  EXPECT_NEAR(b.T_max, 4.0 / 0.75, 1e-15);
  EXPECT_NEAR(b.lower(), b.delta / 2, 0);
  EXPECT_NEAR(b.upper(), 2 * b.T_max, 0);
  try {
    period_bounds(0.2, 3.0, 2.0, 0.5, 0.25, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SubcriticalEnergy);
  }
}

TEST(PeriodBounds, FlatCriticalPeriodInsideWindow) {
  for (double k : {0.5, 1.0, 2.0})
    for (int w : {1, 2, 3}) {
      const double l = w;
      const double T = l / std::sqrt(2 * k);
      const double A = 2 * l * std::sqrt(2 * k);  // twice the minimal action
      const auto b = period_bounds(k, A, l, 0.0, 0.0, 0.0);
      EXPECT_GE(T, b.lower());
      EXPECT_LE(T, b.upper());
    }
}

TEST(FindOrbit, FlatGeodesicActions) {
  const auto sys = flat_cylinder();
  SolveOptions o;
  for (int w : {1, 2, 3}) {
    const auto r = find_orbit(sys, 0.5, w, o);
    ASSERT_TRUE(r.found()) << r.summary();
    EXPECT_NEAR(r.best->action, w, 1e-9);
    EXPECT_NEAR(r.best->loop.T, w, 1e-9);
    EXPECT_EQ(r.best->loop.winding, w);
    EXPECT_LT(r.best->crit.el_residual, 1e-6);
  }
}

TEST(FindOrbit, BumpMatchesReducedOracle) {
  // Circles x = c solve the reduced problem iff a'(c) = 0; the winding -1
  // circle through the field maximum has p_y = -sqrt(2k) + a0.
  const auto sys = bump_cylinder();
  SolveOptions o;
  const auto r = find_orbit(sys, 1.0, -1, o);
  ASSERT_TRUE(r.found()) << r.summary();
  const auto s = summarize_orbit(sys, r.best->loop);
  EXPECT_NEAR(s.x_mean, 0.0, 1e-6);
  EXPECT_LT(std::max(std::abs(s.x_min), std::abs(s.x_max)), 1e-6);
  EXPECT_NEAR(s.p_y, -std::sqrt(2.0) + 0.5, 1e-6);
  EXPECT_LT(s.p_y_spread, 1e-6);
  EXPECT_LT(r.best->crit.el_residual, 1e-6);
  EXPECT_LT(r.best->crit.speed_residual, 1e-6);
  EXPECT_NEAR(r.best->action, std::sqrt(2.0) - 0.5, 1e-9);
}

TEST(FindOrbit, BumpPositiveWindingViaScanSeeds) {
  const auto sys = bump_cylinder();
  SolveOptions o;
  o.scan_seeds = true;
  o.scan.x_min = -3;
  o.scan.x_max = 3;
  o.scan.n_x = 121;
  o.scan.n_vx = 5;
  const auto r = find_orbit(sys, 1.0, 1, o);
  ASSERT_TRUE(r.found()) << r.summary();
  bool central = false;
  for (const auto& orb : r.orbits) {
    const auto s = summarize_orbit(sys, orb.loop);
    if (std::abs(s.x_mean) < 1e-6) {
      central = true;
      EXPECT_NEAR(s.p_y, std::sqrt(2.0) + 0.5, 1e-6);
    }
  }
  EXPECT_TRUE(central);
}

TEST(FindOrbit, AppendixHasNone) {
  const auto sys = appendix_cylinder();
  SolveOptions o;
  o.sigma_schedule = {2, 4, 8};
  const auto r = find_orbit(sys, 1.0, 1, o);
  EXPECT_FALSE(r.found());
  ASSERT_EQ(r.stages.size(), 3u);
  for (const auto& st : r.stages) EXPECT_EQ(st.accepted, 0);
}

TEST(FindOrbit, DeterministicAcrossThreads) {
  const auto sys = bump_cylinder();
  SolveOptions a;
  a.seed = 42;
  SolveOptions b = a;
  b.threads = 4;
  const auto ra = find_orbit(sys, 1.0, -1, a);
  const auto rb = find_orbit(sys, 1.0, -1, b);
  ASSERT_TRUE(ra.found() && rb.found());
  EXPECT_EQ(ra.best->loop.packed(), rb.best->loop.packed());
  EXPECT_EQ(ra.summary(), rb.summary());
}

TEST(Newton, RefinesPerturbedCircle) {
  const auto sys = bump_cylinder();
  auto loop = DiscreteLoop::circle(0.0, -1, 32, 1 / std::sqrt(2.0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  for (auto& q : loop.nodes) q += 1e-6 * Vec2(n01(rng), n01(rng));
  SolveOptions o;
  const auto r = newton_refine(sys, 1.0, loop, o);
  EXPECT_LT(r.grad_norm, 1e-10);
  EXPECT_NEAR(r.loop.T, 1 / std::sqrt(2.0), 1e-9);
  double xmax = 0;
  for (const auto& q : r.loop.nodes) xmax = std::max(xmax, std::abs(q.x()));
  EXPECT_LT(xmax, 1e-8);
  EXPECT_LE(r.null_directions, 4);
}

TEST(Newton, RejectsNonCriticalStart) {
  const auto sys = appendix_cylinder();
  SolveOptions o;
  try {
    newton_refine(sys, 1.0, DiscreteLoop::circle(0.0, 1, 32, 1.0), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotCritical);
  }
}

TEST(Descent, PenaltyConfinesAppendixLoops) {
  const auto sys = appendix_cylinder();
  SolveOptions o;
  const PenaltyFamily pen{2.0, 0.0, 3};
  const auto bounds = period_bounds(1.0, 10.0, 1.0, 1.0, 0.0, 0.0);
  const auto r = minimize_penalized(sys, 1.0, pen, DiscreteLoop::circle(0.0, 1, 32, 1.0), o, bounds);
  EXPECT_GE(r.loop.T, bounds.lower());
  EXPECT_LE(r.loop.T, bounds.upper());
  // The penalty is active at the minimizer: the loop is pushed to the wall.
  double xmin = 1e9;
  for (const auto& q : r.loop.nodes) xmin = std::min(xmin, q.x());
  EXPECT_LT(xmin, -2.0);
  EXPECT_LE(r.value, penalized_action(sys, DiscreteLoop::circle(0.0, 1, 32, 1.0), 1.0, pen));
}

TEST(CircleLength, Estimates) {
  EXPECT_NEAR(circle_length_estimate(flat_cylinder(), 2, 5.0), 2.0, 1e-12);
  EXPECT_NEAR(circle_length_estimate(appendix_cylinder(), 1, 5.0), 1 + std::exp(-5.0), 1e-6);
}

TEST(FindOrbit, QuarticPenaltyGivesSameOrbits) {
  for (int power : {3, 4}) {
    SolveOptions o;
    o.penalty_power = power;
    const auto bump = find_orbit(bump_cylinder(), 1.0, -1, o);
    ASSERT_TRUE(bump.found());
    const auto s = summarize_orbit(bump_cylinder(), bump.best->loop);
    EXPECT_NEAR(s.x_mean, 0.0, 1e-8) << power;
    EXPECT_NEAR(bump.best->action, std::sqrt(2.0) - 0.5, 1e-9) << power;
    const auto flat = find_orbit(flat_cylinder(), 0.5, 2, o);
    ASSERT_TRUE(flat.found());
    EXPECT_NEAR(flat.best->action, 2.0, 1e-9) << power;
  }
}
