#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "magloop/geometry.hpp"
#include "magloop/integrator.hpp"
#include "magloop/loopspace.hpp"

namespace magloop {

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix4d;

struct State {
  Vec2 q = Vec2::Zero();
  Vec2 v = Vec2::Zero();

  Vec4 packed() const { return (Vec4() << q, v).finished(); }
  static State unpack(const Vec4& z) { return State{z.head<2>(), z.tail<2>()}; }
};

double energy(const MagneticSystem& system, const State& s);

/// Second derivative of the chart coordinates: -Gamma(v, v) + Y v.
Vec2 acceleration(const MagneticSystem& system, const Vec2& q, const Vec2& v);
Vec2 acceleration(const LocalGeometry& geo, const Vec2& v);

struct TrajectorySample {
  double t = 0.0;
  State state;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  double tol = 0.0;
  double energy_drift = 0.0;  // max |E(t) - E(0)| over the samples
};

/// Adaptive integration of the magnetic geodesic equation. tol is used as
/// the relative tolerance (absolute tolerance tol * 1e-2). The samples are
/// the accepted steps; pass `sample_dt > 0` for a uniform output grid.
Trajectory flow(const MagneticSystem& system, const State& s0, double duration, double tol, double sample_dt = 0.0);

struct PhasePoint {
  Vec2 q;
  Vec2 p;
};

PhasePoint legendre(const MagneticSystem& system, const Vec2& q, const Vec2& v);
State legendre_inverse(const MagneticSystem& system, const Vec2& q, const Vec2& p);
double hamiltonian(const MagneticSystem& system, const Vec2& q, const Vec2& p);

/// Hamiltonian vector field and its Jacobian at z = (q, p).
Vec4 hamiltonian_field(const MagneticSystem& system, const Vec4& z);
Mat4 hamiltonian_jacobian(const MagneticSystem& system, const Vec4& z);

/// J4 = [[0, I], [-I, 0]], so that omega(a, b) = a^T J4 b.
Mat4 symplectic_j4();

// Poincare section {y-lift = integer}, crossed with vy of the winding's sign.

struct ScanOptions {
  double x_min = -6.0;
  double x_max = 3.0;
  int n_x = 500;
  int n_vx = 21;
  double vx_fraction = 0.9;  // vx sampled in +-fraction of the largest admissible |vx|
  double fp_tol = 1e-6;
  double refine_gate = 1e-2;
  double newton_step = 1e-6;
  int newton_iterations = 30;
  double window_margin = 0.5;
  double time_cap = 200.0;
  double rtol = 1e-11;
  int threads = 1;
};

enum class SeedClass { Returned, NoReturn, FixedPoint };

std::string to_string(SeedClass c);

struct SeedResult {
  double x = 0.0;
  double vx = 0.0;
  double residual = 0.0;  // |dx| + |dvx| after one return, infinity when NoReturn
  SeedClass classification = SeedClass::Returned;
};

struct FixedPoint {
  double x = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double residual = 0.0;
  double return_time = 0.0;
};

struct ScanResult {
  std::vector<SeedResult> seeds;
  std::vector<FixedPoint> fixed_points;
  int no_return = 0;
};

struct ReturnMap {
  bool returned = false;
  State end;
  double time = 0.0;
};

/// Section velocity with prescribed x and vx on y = y0; vy has sign of
/// `winding` and is fixed by the energy. Empty if vx is inadmissible.
std::optional<State> section_state(const MagneticSystem& system, double k, int winding, double x, double vx,
                                   double y0 = 0.0);

/// Follows the flow until the y-lift has advanced by `winding`, or the
/// trajectory leaves [x_lo, x_hi], or time_cap elapses.
ReturnMap return_map(const MagneticSystem& system, const State& s0, int winding, double x_lo, double x_hi,
                     double time_cap, double rtol);

ScanResult poincare_scan(const MagneticSystem& system, double k, int winding, const ScanOptions& opts);

/// DiscreteLoop sampled from the periodic orbit through a fixed point.
DiscreteLoop loop_from_fixed_point(const MagneticSystem& system, double k, int winding, const FixedPoint& fp, int N);

struct ConvexityEvent {
  double t = 0.0;
  double x = 0.0;
  double xddot = 0.0;
};

/// Zeros of vx along a trajectory, located on the dense output, with x''.
std::vector<ConvexityEvent> vx_zero_events(const MagneticSystem& system, const State& s0, double duration,
                                           double rtol, double x_abort = 30.0);

struct MonodromyOptions {
  double max_el_residual = 1e-4;
  double symplectic_tol = 1e-4;
  double rtol = 1e-12;
  double return_tol = 1e-11;
};

struct Monodromy {
  Mat4 D;
  Eigen::Matrix2d P;
  Eigen::Vector4cd eigenvalues;
  Eigen::Vector2cd poincare_eigenvalues;
  Vec4 z0;          // Hamiltonian initial point
  double period = 0.0;
  double symplectic_error = 0.0;
  Mat4 basis;  // columns e1, e2, f2, f1 at z0
  /// B(t)^{-1} D(t) over one period, with B(t) the same frame built at z(t).
  std::vector<Mat4> frame_path;
};

Monodromy monodromy(const MagneticSystem& system, const DiscreteLoop& orbit, double k,
                    const MonodromyOptions& opts = {});

/// Angle of the orthogonal polar factor of a 2x2 matrix.
double block_angle(const Eigen::Matrix2d& M);

/// |total rotation| / (n pi) of the transverse linearized flow over n periods.
double rotation_mean_index(const Monodromy& mono, int n);

}  // namespace magloop
