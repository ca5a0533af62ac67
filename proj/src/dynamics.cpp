#include "magloop/dynamics.hpp"

#include <cmath>

#include "magloop/errors.hpp"

namespace magloop {

double energy(const MagneticSystem& system, const State& s) {
  return 0.5 * s.v.dot(system.chart().metric(s.q) * s.v);
}

Vec2 acceleration(const LocalGeometry& geo, const Vec2& v) {
  const Christoffel gam = christoffel_exact(geo);
  Vec2 a = lorentz_force(geo, v);
  for (int k = 0; k < 2; ++k) a(k) -= v.dot(gam.gamma[k] * v);
  return a;
}

Vec2 acceleration(const MagneticSystem& system, const Vec2& q, const Vec2& v) {
  return acceleration(system.local(q), v);
}

Trajectory flow(const MagneticSystem& system, const State& s0, double duration, double tol, double sample_dt) {
  if (!(duration > 0.0) || !(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "flow needs duration, tol > 0");
  using DP = DormandPrince<4>;
  OdeOptions opts;
  opts.rtol = tol;
  opts.atol = tol * 1e-2;
  const DP solver(opts);
  auto rhs = [&](double, const Vec4& z) {
    const State s = State::unpack(z);
    Vec4 dz;
    dz << s.v, acceleration(system, s.q, s.v);
    return dz;
  };
  Trajectory traj;
  traj.tol = tol;
  traj.samples.push_back({0.0, s0});
  double next_sample = sample_dt;
  solver.integrate(rhs, 0.0, s0.packed(), duration, [&](const DP::Step& st) {
    if (sample_dt > 0.0) {
      while (next_sample <= st.t1 * (1 + 1e-14) && next_sample <= duration * (1 + 1e-14)) {
        const double t = std::min(next_sample, st.t1);
        traj.samples.push_back({t, State::unpack(t == st.t1 ? st.y1 : st.eval(t))});
        next_sample += sample_dt;
      }
    } else {
      traj.samples.push_back({st.t1, State::unpack(st.y1)});
    }
    return true;
  });
  const double e0 = energy(system, s0);
  for (const auto& s : traj.samples) traj.energy_drift = std::max(traj.energy_drift, std::abs(energy(system, s.state) - e0));
  return traj;
}

PhasePoint legendre(const MagneticSystem& system, const Vec2& q, const Vec2& v) {
  const LocalGeometry geo = system.local(q);
  return PhasePoint{q, geo.G * v + geo.theta};
}

State legendre_inverse(const MagneticSystem& system, const Vec2& q, const Vec2& p) {
  const LocalGeometry geo = system.local(q);
  return State{q, geo.Ginv * (p - geo.theta)};
}

double hamiltonian(const MagneticSystem& system, const Vec2& q, const Vec2& p) {
  const LocalGeometry geo = system.local(q);
  const Vec2 w = p - geo.theta;
  return 0.5 * w.dot(geo.Ginv * w);
}

Vec4 hamiltonian_field(const MagneticSystem& system, const Vec4& z) {
  const LocalGeometry geo = system.local(z.head<2>());
  const Vec2 v = geo.Ginv * (z.tail<2>() - geo.theta);
  Vec4 out;
  out.head<2>() = v;
  for (int i = 0; i < 2; ++i) out(2 + i) = 0.5 * v.dot(geo.dG[i] * v) + geo.dtheta[i].dot(v);
  return out;
}

Mat4 hamiltonian_jacobian(const MagneticSystem& system, const Vec4& z) {
  const LocalGeometry geo = system.local(z.head<2>());
  const Vec2 v = geo.Ginv * (z.tail<2>() - geo.theta);
  Mat2 W;
  Mat2 Q;
  for (int i = 0; i < 2; ++i) {
    W.col(i) = geo.dG[i] * v + geo.dtheta[i];
    for (int j = 0; j < 2; ++j) Q(i, j) = 0.5 * v.dot(geo.ddG[i][j] * v) + geo.ddtheta[i][j].dot(v);
  }
  Mat4 A;
  A.block<2, 2>(0, 0) = -geo.Ginv * W;
  A.block<2, 2>(0, 2) = geo.Ginv;
  A.block<2, 2>(2, 0) = Q - W.transpose() * geo.Ginv * W;
  A.block<2, 2>(2, 2) = W.transpose() * geo.Ginv;
  return A;
}

Mat4 symplectic_j4() {
  Mat4 J = Mat4::Zero();
  J.block<2, 2>(0, 2) = Mat2::Identity();
  J.block<2, 2>(2, 0) = -Mat2::Identity();
  return J;
}

std::vector<ConvexityEvent> vx_zero_events(const MagneticSystem& system, const State& s0, double duration,
                                           double rtol, double x_abort) {
  using DP = DormandPrince<4>;
  OdeOptions opts;
  opts.rtol = rtol;
  opts.atol = rtol * 1e-2;
  const DP solver(opts);
  auto rhs = [&](double, const Vec4& z) {
    const State s = State::unpack(z);
    Vec4 dz;
    dz << s.v, acceleration(system, s.q, s.v);
    return dz;
  };
  std::vector<ConvexityEvent> events;
  constexpr int kSub = 4;
  solver.integrate(rhs, 0.0, s0.packed(), duration, [&](const DP::Step& st) {
    double ta = st.t0;
    double va = st.y0(2);
    for (int s = 1; s <= kSub; ++s) {
      const double tb = st.t0 + st.h() * s / kSub;
      const double vb = s == kSub ? st.y1(2) : st.eval(tb)(2);
      if ((va < 0.0 && vb >= 0.0) || (va > 0.0 && vb <= 0.0)) {
        double lo = ta;
        double hi = tb;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double vm = st.eval(mid)(2);
          if ((vm > 0.0) == (va > 0.0) && vm != 0.0) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        const State at = State::unpack(st.eval(0.5 * (lo + hi)));
        events.push_back({0.5 * (lo + hi), at.q.x(), acceleration(system, at.q, at.v).x()});
      }
      ta = tb;
      va = vb;
    }
    return std::abs(st.y1(0)) <= x_abort;
  });
  return events;
}

}  // namespace magloop
