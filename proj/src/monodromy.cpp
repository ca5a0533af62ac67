#include <cmath>
#include <numbers>

#include "magloop/dynamics.hpp"
#include "magloop/errors.hpp"

namespace magloop {

namespace {

using Vec20 = Eigen::Matrix<double, 20, 1>;
using DP20 = DormandPrince<20>;

double omega(const Vec4& a, const Vec4& b) { return a.dot(symplectic_j4() * b); }

struct FrameChoice {
  int e2 = 0;
  int f2 = 0;
};

Vec4 project(const Vec4& c, const Vec4& e1, const Vec4& f1) { return c - omega(c, f1) * e1 + omega(c, e1) * f1; }

/// Columns e1, e2, f2, f1 with omega(e1, f1) = omega(e2, f2) = 1 and the
/// two planes omega-orthogonal.
Mat4 frame(const MagneticSystem& system, const Vec4& z, FrameChoice* choice) {
  const Vec4 xh = hamiltonian_field(system, z);
  const Vec4 grad = -symplectic_j4() * xh;
  const Vec4 e1 = xh / xh.norm();
  const Vec4 f1 = grad / omega(e1, grad);
  const Mat4 I = Mat4::Identity();
  if (choice->e2 < 0) {
    double best = -1.0;
    for (int i = 0; i < 4; ++i) {
      const double n = project(I.col(i), e1, f1).norm();
      if (n > best) {
        best = n;
        choice->e2 = i;
      }
    }
    const Vec4 e2 = project(I.col(choice->e2), e1, f1);
    best = -1.0;
    for (int i = 0; i < 4; ++i) {
      const double w = std::abs(omega(e2, project(I.col(i), e1, f1)));
      if (w > best) {
        best = w;
        choice->f2 = i;
      }
    }
  }
  Vec4 e2 = project(I.col(choice->e2), e1, f1);
  e2 /= e2.norm();
  Vec4 f2 = project(I.col(choice->f2), e1, f1);
  f2 /= omega(e2, f2);
  Mat4 B;
  B << e1, e2, f2, f1;
  return B;
}

}  // namespace

double block_angle(const Eigen::Matrix2d& M) { return std::atan2(M(1, 0) - M(0, 1), M(0, 0) + M(1, 1)); }

Monodromy monodromy(const MagneticSystem& system, const DiscreteLoop& orbit, double k, const MonodromyOptions& opts) {
  const Criticality crit = criticality(system, orbit, k);
  if (crit.el_residual > opts.max_el_residual)
    throw Error(ErrorKind::NotCritical, "EL residual " + std::to_string(crit.el_residual) + " too large");
  const int N = orbit.N();
  const int w = orbit.winding;
  if (w == 0) throw Error(ErrorKind::InvalidArgument, "monodromy needs a non-contractible orbit");

  // start where the orbit crosses the section most transversally
  int j0 = 0;
  Vec2 v0 = Vec2::Zero();
  double x_lo = orbit.nodes[0].x();
  double x_hi = x_lo;
  for (int j = 0; j < N; ++j) {
    const Vec2 v = (orbit.node(j + 1) - orbit.node(j - 1)) * (0.5 * N / orbit.T);
    if (std::abs(v.y()) > std::abs(v0.y())) {
      v0 = v;
      j0 = j;
    }
    x_lo = std::min(x_lo, orbit.nodes[j].x());
    x_hi = std::max(x_hi, orbit.nodes[j].x());
  }
  if (v0.y() * w <= 0.0) throw Error(ErrorKind::NotCritical, "orbit does not cross the section along its winding");
  const double y0 = orbit.nodes[j0].y();
  const double span = x_hi - x_lo + 5.0;
  x_lo -= span;
  x_hi += span;

  // return-map Newton on (x, vx) with section y = y0
  Eigen::Vector2d s(orbit.nodes[j0].x(), v0.x());
  auto residual = [&](const Eigen::Vector2d& u, ReturnMap* out) -> std::optional<Eigen::Vector2d> {
    const auto st = section_state(system, k, w, u(0), u(1), y0);
    if (!st) return std::nullopt;
    const ReturnMap r = return_map(system, *st, w, x_lo, x_hi, 10.0 * orbit.T + 10.0, 1e-13);
    if (!r.returned) return std::nullopt;
    if (out) *out = r;
    return Eigen::Vector2d(r.end.q.x() - u(0), r.end.v.x() - u(1));
  };
  ReturnMap ret;
  auto F = residual(s, &ret);
  for (int it = 0; it < 30 && F && F->norm() > opts.return_tol; ++it) {
    Eigen::Matrix2d J;
    const double h = 1e-7;
    for (int d = 0; d < 2; ++d) {
      Eigen::Vector2d sp = s;
      sp(d) += h;
      const auto Fp = residual(sp, nullptr);
      if (!Fp) throw Error(ErrorKind::NotCritical, "return map undefined near the orbit");
      J.col(d) = (*Fp - *F) / h;
    }
    Eigen::Vector2d step = -J.completeOrthogonalDecomposition().solve(*F);
    if (step.norm() > 0.1) step *= 0.1 / step.norm();
    s += step;
    F = residual(s, &ret);
  }
  if (!F || F->norm() > 1e-8) throw Error(ErrorKind::NotCritical, "periodic orbit did not close under the flow");

  const State start = *section_state(system, k, w, s(0), s(1), y0);
  const PhasePoint pp = legendre(system, start.q, start.v);
  Monodromy mono;
  mono.z0 << pp.q, pp.p;
  mono.period = ret.time;

  OdeOptions ode;
  ode.rtol = opts.rtol;
  ode.atol = opts.rtol * 1e-2;
  const DP20 solver(ode);
  const DP20::Rhs rhs = [&](double, const Vec20& y) {
    const Vec4 z = y.head<4>();
    const Eigen::Map<const Mat4> Y(y.data() + 4);
    Vec20 dy;
    dy.head<4>() = hamiltonian_field(system, z);
    Eigen::Map<Mat4>(dy.data() + 4) = hamiltonian_jacobian(system, z) * Y;
    return dy;
  };
  Vec20 y;
  y.head<4>() = mono.z0;
  Eigen::Map<Mat4>(y.data() + 4) = Mat4::Identity();

  FrameChoice choice{-1, -1};
  mono.basis = frame(system, mono.z0, &choice);
  mono.frame_path.push_back(mono.basis.inverse());
  auto record = [&](const Vec20& state) {
    const Mat4 B = frame(system, state.head<4>(), &choice);
    const Eigen::Map<const Mat4> D(state.data() + 4);
    mono.frame_path.push_back(B.inverse() * D);
  };
  const auto [t_end, y_end] = solver.integrate(rhs, 0.0, y, mono.period, [&](const DP20::Step& st) {
    for (int sub = 1; sub < 8; ++sub) record(st.eval(st.t0 + st.h() * sub / 8.0));
    record(st.y1);
    return true;
  });
  (void)t_end;
  mono.D = Eigen::Map<const Mat4>(y_end.data() + 4);

  const Mat4 J = symplectic_j4();
  mono.symplectic_error = (mono.D.transpose() * J * mono.D - J).cwiseAbs().maxCoeff();
  if (mono.symplectic_error > opts.symplectic_tol)
    throw Error(ErrorKind::SymplecticityLoss, "D^T J D - J = " + std::to_string(mono.symplectic_error));

  const Mat4 reduced = mono.basis.inverse() * mono.D * mono.basis;
  mono.P = reduced.block<2, 2>(1, 1);
  mono.eigenvalues = Eigen::EigenSolver<Mat4>(mono.D, false).eigenvalues();
  mono.poincare_eigenvalues = Eigen::EigenSolver<Eigen::Matrix2d>(mono.P, false).eigenvalues();
  return mono;
}

double rotation_mean_index(const Monodromy& mono, int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "rotation estimate needs n >= 1");
  double total = 0.0;
  double prev = 0.0;
  bool first = true;
  Mat4 Dj = Mat4::Identity();
  for (int j = 0; j < n; ++j) {
    for (const Mat4& F : mono.frame_path) {
      const Mat4 M = F * Dj * mono.basis;
      const double a = block_angle(M.block<2, 2>(1, 1));
      if (first) {
        prev = a;
        first = false;
        continue;
      }
      double d = a - prev;
      while (d > std::numbers::pi) d -= 2 * std::numbers::pi;
      while (d < -std::numbers::pi) d += 2 * std::numbers::pi;
      total += d;
      prev = a;
    }
    Dj = mono.D * Dj;
  }
  return std::abs(total) / (n * std::numbers::pi);
}

}  // namespace magloop
