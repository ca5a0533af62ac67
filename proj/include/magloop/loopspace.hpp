#pragma once

#include <Eigen/Dense>
#include <vector>

#include "magloop/geometry.hpp"

namespace magloop {

/// Periodic curve with N nodes; node N is node 0 shifted by (0, winding).
struct DiscreteLoop {
  std::vector<Vec2> nodes;
  double T = 1.0;
  int winding = 0;

  int N() const { return static_cast<int>(nodes.size()); }
  Vec2 node(int j) const;  // periodic lift, valid for any integer j

  /// Throws InvalidArgument unless T > 0 and N >= 8.
  void validate() const;

  /// [x0, y0, x1, y1, ..., T]
  Eigen::VectorXd packed() const;
  static DiscreteLoop unpack(const Eigen::VectorXd& z, int winding);

  /// Constant-speed circle x = x0, y from y0 over `winding` turns.
  static DiscreteLoop circle(double x0, int winding, int N, double T, double y0 = 0.0);
};

struct TangentPerturbation {
  std::vector<Vec2> xi;
  double alpha = 0.0;

  Eigen::VectorXd packed() const;
  static TangentPerturbation unpack(const Eigen::VectorXd& z);
};

/// Ramp phi(s) = 0 for s <= 0, s^3 (or s^4) for s > 0.
struct PenaltyFamily {
  double sigma = 2.0;
  double center_x = 0.0;
  int power = 3;

  double value(const Vec2& q) const;
  double dvalue(const Vec2& q) const;   // derivative in x
  double ddvalue(const Vec2& q) const;  // second derivative in x
};

double action(const MagneticSystem& system, const DiscreteLoop& loop, double k);
double penalized_action(const MagneticSystem& system, const DiscreteLoop& loop, double k,
                        const PenaltyFamily& penalty);

TangentPerturbation gradient(const MagneticSystem& system, const DiscreteLoop& loop, double k,
                             const PenaltyFamily* penalty = nullptr);
Eigen::VectorXd gradient_vector(const MagneticSystem& system, const DiscreteLoop& loop, double k,
                                const PenaltyFamily* penalty = nullptr);
Eigen::MatrixXd hessian(const MagneticSystem& system, const DiscreteLoop& loop, double k,
                        const PenaltyFamily* penalty = nullptr);

/// Discrete W^{1,2} metric on perturbations (with unit weight on the period).
Eigen::MatrixXd loop_metric(const MagneticSystem& system, const DiscreteLoop& loop);

DiscreteLoop iterate_loop(const DiscreteLoop& loop, int n);
DiscreteLoop rotate_nodes(const DiscreteLoop& loop, int shift);

double loop_length(const MagneticSystem& system, const DiscreteLoop& loop);
int winding(const DiscreteLoop& loop);

/// Kinetic and magnetic parts of the action at T = 1:
/// action = kinetic / T + flux + k T.
struct ActionParts {
  double kinetic = 0.0;
  double flux = 0.0;
};
ActionParts action_parts(const MagneticSystem& system, const DiscreteLoop& loop);

struct Criticality {
  double el_residual = 0.0;     // max over nodes of N |g_j|_{g*} / T
  double speed_residual = 0.0;  // max over segments of | |x'_j|^2 - 2 k T^2 |
  double period_residual = 0.0; // |dS/dT|
};
Criticality criticality(const MagneticSystem& system, const DiscreteLoop& loop, double k);

/// Discrete velocity jump at node 0, x'(1-) - x'(0+), in chart coordinates.
Vec2 velocity_jump(const DiscreteLoop& loop);

}  // namespace magloop
