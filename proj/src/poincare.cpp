#include <cmath>
#include <limits>

#include "magloop/dynamics.hpp"
#include "magloop/errors.hpp"
#include "magloop/parallel.hpp"

namespace magloop {

namespace {

using DP = DormandPrince<4>;

Vec4 geodesic_rhs(const MagneticSystem& system, const Vec4& z) {
  const State s = State::unpack(z);
  Vec4 dz;
  dz << s.v, acceleration(system, s.q, s.v);
  return dz;
}

struct Evaluation {
  bool returned = false;
  Eigen::Vector2d residual = Eigen::Vector2d::Zero();
  double time = 0.0;
  double vy = 0.0;
};

Evaluation evaluate(const MagneticSystem& system, double k, int winding, double x, double vx, double x_lo,
                    double x_hi, const ScanOptions& opts) {
  Evaluation out;
  const auto s0 = section_state(system, k, winding, x, vx);
  if (!s0) return out;
  const ReturnMap r = return_map(system, *s0, winding, x_lo, x_hi, opts.time_cap, opts.rtol);
  if (!r.returned) return out;
  out.returned = true;
  out.residual = Eigen::Vector2d(r.end.q.x() - x, r.end.v.x() - vx);
  out.time = r.time;
  out.vy = s0->v.y();
  return out;
}

}  // namespace

std::string to_string(SeedClass c) {
  switch (c) {
    case SeedClass::Returned: return "returned";
    case SeedClass::NoReturn: return "no-return";
    case SeedClass::FixedPoint: return "fixed-point";
  }
  return "unknown";
}

std::optional<State> section_state(const MagneticSystem& system, double k, int winding, double x, double vx,
                                   double y0) {
  if (winding == 0) throw Error(ErrorKind::InvalidArgument, "section crossing needs nonzero winding");
  const Vec2 q(x, y0);
  const Mat2 G = system.chart().metric(q);
  // g22 vy^2 + 2 g12 vx vy + g11 vx^2 - 2k = 0, roots of opposite sign iff g11 vx^2 < 2k
  const double c0 = G(0, 0) * vx * vx - 2.0 * k;
  if (!(c0 < 0.0)) return std::nullopt;
  const double b = G(0, 1) * vx;
  const double disc = b * b - G(1, 1) * c0;
  const double root = winding > 0 ? (-b + std::sqrt(disc)) / G(1, 1) : (-b - std::sqrt(disc)) / G(1, 1);
  return State{q, Vec2(vx, root)};
}

ReturnMap return_map(const MagneticSystem& system, const State& s0, int winding, double x_lo, double x_hi,
                     double time_cap, double rtol) {
  OdeOptions opts;
  opts.rtol = rtol;
  opts.atol = rtol * 1e-2;
  const DP solver(opts);
  const DP::Rhs rhs = [&](double, const Vec4& z) { return geodesic_rhs(system, z); };
  const double target = s0.q.y() + winding;
  const double sgn = winding > 0 ? 1.0 : -1.0;
  ReturnMap out;
  solver.integrate(rhs, 0.0, s0.packed(), time_cap, [&](const DP::Step& st) {
    if (st.y1(0) < x_lo || st.y1(0) > x_hi) return false;
    const double ga = sgn * (st.y0(1) - target);
    const double gb = sgn * (st.y1(1) - target);
    if (!(ga < 0.0 && gb >= 0.0)) return true;
    // bracket on the dense output, then polish with exact single steps
    double lo = st.t0;
    double hi = st.t1;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (sgn * (st.eval(mid)(1) - target) < 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    double t = 0.5 * (lo + hi);
    Vec4 z = DP::single_step(rhs, st.t0, st.y0, t - st.t0);
    for (int it = 0; it < 3; ++it) {
      const double g = z(1) - target;
      if (g == 0.0 || z(3) == 0.0) break;
      t -= g / z(3);
      z = DP::single_step(rhs, st.t0, st.y0, t - st.t0);
    }
    out.returned = true;
    out.end = State::unpack(z);
    out.time = t;
    return false;
  });
  return out;
}

ScanResult poincare_scan(const MagneticSystem& system, double k, int winding, const ScanOptions& opts) {
  if (!(k > 0.0)) throw Error(ErrorKind::InvalidArgument, "scan energy must be positive");
  if (opts.n_x < 1 || opts.n_vx < 1 || !(opts.x_max >= opts.x_min))
    throw Error(ErrorKind::InvalidArgument, "scan grid is empty");
  const double x_lo = opts.x_min - opts.window_margin;
  const double x_hi = opts.x_max + opts.window_margin;
  const int nx = opts.n_x;
  const int nv = opts.n_vx;

  ScanResult result;
  result.seeds.resize(static_cast<std::size_t>(nx) * nv);
  parallel_for(nx * nv, opts.threads, [&](int idx) {
    const int i = idx / nv;
    const int j = idx % nv;
    const double x = nx == 1 ? opts.x_min : opts.x_min + (opts.x_max - opts.x_min) * i / (nx - 1);
    const double g11 = system.chart().metric(Vec2(x, 0.0))(0, 0);
    const double vmax = std::sqrt(2.0 * k / g11);
    const double vx = nv == 1 ? 0.0 : opts.vx_fraction * vmax * (-1.0 + 2.0 * j / (nv - 1));
    SeedResult& seed = result.seeds[idx];
    seed.x = x;
    seed.vx = vx;
    const Evaluation e = evaluate(system, k, winding, x, vx, x_lo, x_hi, opts);
    if (!e.returned) {
      seed.residual = std::numeric_limits<double>::infinity();
      seed.classification = SeedClass::NoReturn;
      return;
    }
    seed.residual = e.residual.lpNorm<1>();
    seed.classification = seed.residual < opts.fp_tol ? SeedClass::FixedPoint : SeedClass::Returned;
  });

  auto add_fixed_point = [&](const FixedPoint& fp) {
    for (const auto& other : result.fixed_points)
      if (std::abs(other.x - fp.x) + std::abs(other.vx - fp.vx) < 1e-5) return;
    result.fixed_points.push_back(fp);
  };

  std::vector<int> candidates;
  for (int idx = 0; idx < nx * nv; ++idx) {
    const SeedResult& s = result.seeds[idx];
    if (s.classification == SeedClass::NoReturn) {
      ++result.no_return;
      continue;
    }
    if (s.classification == SeedClass::FixedPoint) {
      const auto s0 = section_state(system, k, winding, s.x, s.vx);
      const ReturnMap r = return_map(system, *s0, winding, x_lo, x_hi, opts.time_cap, opts.rtol);
      add_fixed_point({s.x, s.vx, s0->v.y(), s.residual, r.time});
      continue;
    }
    if (s.residual >= opts.refine_gate) continue;
    const int i = idx / nv;
    const int j = idx % nv;
    bool is_min = true;
    for (int di = -1; di <= 1 && is_min; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        if (di == 0 && dj == 0) continue;
        const int ii = i + di;
        const int jj = j + dj;
        if (ii < 0 || ii >= nx || jj < 0 || jj >= nv) continue;
        const SeedResult& n = result.seeds[ii * nv + jj];
        if (n.classification != SeedClass::NoReturn && n.residual < s.residual) {
          is_min = false;
          break;
        }
      }
    }
    if (is_min) candidates.push_back(idx);
  }

  // 2D Newton on the return map with a finite-difference Jacobian.
  std::vector<std::optional<FixedPoint>> refined(candidates.size());
  parallel_for(static_cast<int>(candidates.size()), opts.threads, [&](int c) {
    const SeedResult& s = result.seeds[candidates[c]];
    Eigen::Vector2d z(s.x, s.vx);
    Evaluation e = evaluate(system, k, winding, z(0), z(1), x_lo, x_hi, opts);
    for (int it = 0; it < opts.newton_iterations && e.returned; ++it) {
      if (e.residual.lpNorm<1>() < 1e-3 * opts.fp_tol) break;
      Eigen::Matrix2d J;
      bool ok = true;
      for (int d = 0; d < 2; ++d) {
        Eigen::Vector2d zp = z;
        zp(d) += opts.newton_step;
        const Evaluation ep = evaluate(system, k, winding, zp(0), zp(1), x_lo, x_hi, opts);
        if (!ep.returned) {
          ok = false;
          break;
        }
        J.col(d) = (ep.residual - e.residual) / opts.newton_step;
      }
      if (!ok) break;
      Eigen::Vector2d step = -J.completeOrthogonalDecomposition().solve(e.residual);
      const double limit = 0.25;
      if (step.norm() > limit) step *= limit / step.norm();
      z += step;
      if (z(0) < opts.x_min || z(0) > opts.x_max) return;
      e = evaluate(system, k, winding, z(0), z(1), x_lo, x_hi, opts);
    }
    if (!e.returned || z(0) < opts.x_min || z(0) > opts.x_max) return;
    const double res = e.residual.lpNorm<1>();
    if (res < opts.fp_tol) refined[c] = FixedPoint{z(0), z(1), e.vy, res, e.time};
  });
  for (const auto& fp : refined)
    if (fp) add_fixed_point(*fp);
  return result;
}

DiscreteLoop loop_from_fixed_point(const MagneticSystem& system, double k, int winding, const FixedPoint& fp,
                                   int N) {
  const auto s0 = section_state(system, k, winding, fp.x, fp.vx);
  if (!s0) throw Error(ErrorKind::InvalidArgument, "fixed point is not on the energy level");
  OdeOptions opts;
  opts.rtol = 1e-12;
  opts.atol = 1e-14;
  const DP solver(opts);
  const DP::Rhs rhs = [&](double, const Vec4& z) { return geodesic_rhs(system, z); };
  DiscreteLoop loop;
  loop.T = fp.return_time;
  loop.winding = winding;
  loop.nodes.push_back(s0->q);
  int next = 1;
  solver.integrate(rhs, 0.0, s0->packed(), fp.return_time, [&](const DP::Step& st) {
    while (next < N) {
      const double t = fp.return_time * next / N;
      if (t > st.t1) break;
      loop.nodes.push_back(st.eval(t).head<2>());
      ++next;
    }
    return true;
  });
  while (static_cast<int>(loop.nodes.size()) < N) loop.nodes.push_back(loop.nodes.back());
  return loop;
}

}  // namespace magloop
