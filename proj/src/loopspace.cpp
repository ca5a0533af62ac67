#include "magloop/loopspace.hpp"

#include <cmath>

#include "magloop/errors.hpp"

namespace magloop {

namespace {

struct Segment {
  Vec2 delta;
  LocalGeometry geo;
};

Segment segment(const MagneticSystem& system, const DiscreteLoop& loop, int j) {
  const Vec2 a = loop.node(j);
  const Vec2 b = loop.node(j + 1);
  return Segment{b - a, system.local(0.5 * (a + b))};
}

int wrap(int j, int N) { return ((j % N) + N) % N; }

}  // namespace

Vec2 DiscreteLoop::node(int j) const {
  const int n = N();
  const int r = j >= 0 ? j / n : -((-j + n - 1) / n);
  const int i = j - r * n;
  return nodes[i] + Vec2(0.0, static_cast<double>(r) * winding);
}

void DiscreteLoop::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(ErrorKind::InvalidArgument, "loop period must be positive");
  if (N() < 8) throw Error(ErrorKind::InvalidArgument, "loop needs at least 8 nodes");
}

Eigen::VectorXd DiscreteLoop::packed() const {
  Eigen::VectorXd z(2 * N() + 1);
  for (int j = 0; j < N(); ++j) z.segment<2>(2 * j) = nodes[j];
  z(2 * N()) = T;
  return z;
}

DiscreteLoop DiscreteLoop::unpack(const Eigen::VectorXd& z, int winding) {
  DiscreteLoop loop;
  const int n = static_cast<int>((z.size() - 1) / 2);
  loop.nodes.resize(n);
  for (int j = 0; j < n; ++j) loop.nodes[j] = z.segment<2>(2 * j);
  loop.T = z(2 * n);
  loop.winding = winding;
  return loop;
}

DiscreteLoop DiscreteLoop::circle(double x0, int winding, int N, double T, double y0) {
  DiscreteLoop loop;
  loop.nodes.resize(N);
  for (int j = 0; j < N; ++j) loop.nodes[j] = Vec2(x0, y0 + static_cast<double>(winding) * j / N);
  loop.T = T;
  loop.winding = winding;
  return loop;
}

Eigen::VectorXd TangentPerturbation::packed() const {
  const int n = static_cast<int>(xi.size());
  Eigen::VectorXd z(2 * n + 1);
  for (int j = 0; j < n; ++j) z.segment<2>(2 * j) = xi[j];
  z(2 * n) = alpha;
  return z;
}

TangentPerturbation TangentPerturbation::unpack(const Eigen::VectorXd& z) {
  TangentPerturbation t;
  const int n = static_cast<int>((z.size() - 1) / 2);
  t.xi.resize(n);
  for (int j = 0; j < n; ++j) t.xi[j] = z.segment<2>(2 * j);
  t.alpha = z(2 * n);
  return t;
}

double PenaltyFamily::value(const Vec2& q) const {
  const double s = std::abs(q.x() - center_x) - sigma;
  return s > 0.0 ? std::pow(s, power) : 0.0;
}

double PenaltyFamily::dvalue(const Vec2& q) const {
  const double d = q.x() - center_x;
  const double s = std::abs(d) - sigma;
  if (s <= 0.0) return 0.0;
  return power * std::pow(s, power - 1) * (d > 0 ? 1.0 : -1.0);
}

double PenaltyFamily::ddvalue(const Vec2& q) const {
  const double s = std::abs(q.x() - center_x) - sigma;
  if (s <= 0.0) return 0.0;
  return power * (power - 1) * std::pow(s, power - 2);
}

ActionParts action_parts(const MagneticSystem& system, const DiscreteLoop& loop) {
  loop.validate();
  const double n = loop.N();
  ActionParts parts;
  for (int j = 0; j < loop.N(); ++j) {
    const Segment s = segment(system, loop, j);
    parts.kinetic += 0.5 * n * s.delta.dot(s.geo.G * s.delta);
    parts.flux += s.geo.theta.dot(s.delta);
  }
  return parts;
}

double action(const MagneticSystem& system, const DiscreteLoop& loop, double k) {
  const ActionParts p = action_parts(system, loop);
  return p.kinetic / loop.T + p.flux + k * loop.T;
}

double penalized_action(const MagneticSystem& system, const DiscreteLoop& loop, double k,
                        const PenaltyFamily& penalty) {
  return action(system, loop, k) + penalty.value(loop.nodes[0]);
}

Eigen::VectorXd gradient_vector(const MagneticSystem& system, const DiscreteLoop& loop, double k,
                                const PenaltyFamily* penalty) {
  loop.validate();
  const int N = loop.N();
  const double c = N / loop.T;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * N + 1);
  double dT = k;
  for (int j = 0; j < N; ++j) {
    const Segment s = segment(system, loop, j);
    const Vec2 GD = s.geo.G * s.delta;
    const Vec2 q_delta = c * GD + s.geo.theta;
    Vec2 q_m;
    for (int i = 0; i < 2; ++i) q_m(i) = 0.5 * c * s.delta.dot(s.geo.dG[i] * s.delta) + s.geo.dtheta[i].dot(s.delta);
    g.segment<2>(2 * j) += -q_delta + 0.5 * q_m;
    g.segment<2>(2 * wrap(j + 1, N)) += q_delta + 0.5 * q_m;
    dT -= 0.5 * c * s.delta.dot(GD) / loop.T;
  }
  g(2 * N) = dT;
  if (penalty) g(0) += penalty->dvalue(loop.nodes[0]);
  return g;
}

TangentPerturbation gradient(const MagneticSystem& system, const DiscreteLoop& loop, double k,
                             const PenaltyFamily* penalty) {
  return TangentPerturbation::unpack(gradient_vector(system, loop, k, penalty));
}

Eigen::MatrixXd hessian(const MagneticSystem& system, const DiscreteLoop& loop, double k,
                        const PenaltyFamily* penalty) {
  loop.validate();
  const int N = loop.N();
  const double T = loop.T;
  const double c = N / T;
  const int iT = 2 * N;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * N + 1, 2 * N + 1);
  for (int j = 0; j < N; ++j) {
    const Segment s = segment(system, loop, j);
    const LocalGeometry& geo = s.geo;
    const Vec2& d = s.delta;
    const Mat2 q_dd = c * geo.G;
    Mat2 q_dm;  // q_dm(i, k) = d q_delta_i / d m_k
    Mat2 q_mm;
    Vec2 dK;  // dK/dm
    for (int kk = 0; kk < 2; ++kk) {
      q_dm.col(kk) = c * geo.dG[kk] * d + geo.dtheta[kk];
      dK(kk) = 0.5 * c * d.dot(geo.dG[kk] * d);
      for (int l = 0; l < 2; ++l) q_mm(kk, l) = 0.5 * c * d.dot(geo.ddG[kk][l] * d) + geo.ddtheta[kk][l].dot(d);
    }
    const Vec2 dK_ddelta = c * geo.G * d;
    const double K = 0.5 * c * d.dot(geo.G * d);

    const int idx[2] = {2 * j, 2 * wrap(j + 1, N)};
    const double sgn[2] = {-1.0, 1.0};
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const Mat2 block = sgn[a] * sgn[b] * q_dd + 0.5 * sgn[a] * q_dm + 0.5 * sgn[b] * q_dm.transpose() +
                           0.25 * q_mm;
        H.block<2, 2>(idx[a], idx[b]) += block;
      }
      const Vec2 dK_du = sgn[a] * dK_ddelta + 0.5 * dK;
      H.block<2, 1>(idx[a], iT) += -dK_du / T;
      H.block<1, 2>(iT, idx[a]) += -dK_du.transpose() / T;
    }
    H(iT, iT) += 2.0 * K / (T * T);
  }
  if (penalty) H(0, 0) += penalty->ddvalue(loop.nodes[0]);
  (void)k;
  return H;
}

Eigen::MatrixXd loop_metric(const MagneticSystem& system, const DiscreteLoop& loop) {
  loop.validate();
  const int N = loop.N();
  const double h = 1.0 / N;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2 * N + 1, 2 * N + 1);
  for (int j = 0; j < N; ++j) {
    M.block<2, 2>(2 * j, 2 * j) += h * system.local(loop.nodes[j]).G;
    const Segment s = segment(system, loop, j);
    const Mat2 W = static_cast<double>(N) * s.geo.G;
    const int a = 2 * j;
    const int b = 2 * wrap(j + 1, N);
    M.block<2, 2>(a, a) += W;
    M.block<2, 2>(b, b) += W;
    M.block<2, 2>(a, b) -= W;
    M.block<2, 2>(b, a) -= W;
  }
  M(2 * N, 2 * N) = 1.0;
  return M;
}

DiscreteLoop iterate_loop(const DiscreteLoop& loop, int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "iterate count must be positive");
  DiscreteLoop out;
  out.nodes.reserve(static_cast<std::size_t>(loop.N()) * n);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < loop.N(); ++j) out.nodes.push_back(loop.node(r * loop.N() + j));
  out.T = loop.T * n;
  out.winding = loop.winding * n;
  return out;
}

DiscreteLoop rotate_nodes(const DiscreteLoop& loop, int shift) {
  DiscreteLoop out = loop;
  for (int j = 0; j < loop.N(); ++j) out.nodes[j] = loop.node(j + shift);
  return out;
}

double loop_length(const MagneticSystem& system, const DiscreteLoop& loop) {
  loop.validate();
  double len = 0.0;
  for (int j = 0; j < loop.N(); ++j) {
    const Segment s = segment(system, loop, j);
    len += std::sqrt(s.delta.dot(s.geo.G * s.delta));
  }
  return len;
}

int winding(const DiscreteLoop& loop) { return loop.winding; }

Criticality criticality(const MagneticSystem& system, const DiscreteLoop& loop, double k) {
  const Eigen::VectorXd g = gradient_vector(system, loop, k);
  const int N = loop.N();
  Criticality out;
  for (int j = 0; j < N; ++j) {
    const Vec2 gj = g.segment<2>(2 * j);
    const Mat2 Ginv = system.local(loop.nodes[j]).Ginv;
    out.el_residual = std::max(out.el_residual, N * std::sqrt(gj.dot(Ginv * gj)) / loop.T);
    const Segment s = segment(system, loop, j);
    const Vec2 v = N * s.delta;
    out.speed_residual = std::max(out.speed_residual, std::abs(v.dot(s.geo.G * v) - 2.0 * k * loop.T * loop.T));
  }
  out.period_residual = std::abs(g(2 * N));
  return out;
}

Vec2 velocity_jump(const DiscreteLoop& loop) {
  const int N = loop.N();
  return N * (loop.node(N) - loop.node(N - 1)) - N * (loop.node(1) - loop.node(0));
}

}  // namespace magloop
