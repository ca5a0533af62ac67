#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "magloop/dynamics.hpp"
#include "magloop/geometry.hpp"
#include "magloop/loopspace.hpp"

namespace magloop {

struct PeriodBounds {
  double delta = 0.0;
  double T_max = 0.0;

  double lower() const { return 0.5 * delta; }
  double upper() const { return 2.0 * T_max; }
};

/// delta(k) = 2 l^2 / (l^2 + 4A + 4|theta|^2), T_max = (A + B) / (k - c_u).
/// Throws SubcriticalEnergy when k <= c_u.
PeriodBounds period_bounds(double k, double A, double l_alpha, double theta_inf, double c_u, double B);

struct SolveOptions {
  int N = 32;
  std::vector<double> sigma_schedule{2, 4, 8, 16, 32};
  double action_cap = 10.0;  // A
  double action_offset = 0.0;  // B
  double c_u_estimate = 0.0;
  std::optional<double> l_alpha;    // estimated from circles when unset
  std::optional<double> theta_inf;  // taken from the system or sampled when unset
  int max_iterations = 4000;
  int memory = 12;
  double g_tol = 1e-8;
  double newton_tol = 1e-10;
  double newton_step_tol = 1e-6;
  int newton_max_iterations = 60;
  double trust_radius = 0.5;
  double escape_radius = 2.0;
  double acceptance_margin = 1.0;
  double penalty_center = 0.0;
  int penalty_power = 3;
  int collapse_iterations = 20;
  std::vector<double> x_inits{-2, -1, 0, 1, 2};
  double perturbation = 0.02;
  std::uint64_t seed = 1;
  bool scan_seeds = false;
  ScanOptions scan;
  int threads = 1;
};

enum class DescentStatus { Converged, IterationCap, PeriodCollapse, Stalled };
std::string to_string(DescentStatus s);

struct DescentResult {
  DiscreteLoop loop;
  DescentStatus status = DescentStatus::Converged;
  int iterations = 0;
  double value = 0.0;
  double grad_norm = 0.0;
};

/// Quasi-Newton descent of the penalized action over (nodes, log T), with T
/// clamped to [bounds.lower(), bounds.upper()]. Non-convergence is reported
/// in the status rather than thrown so callers keep the best iterate.
DescentResult minimize_penalized(const MagneticSystem& system, double k, const PenaltyFamily& penalty,
                                 const DiscreteLoop& init, const SolveOptions& opts, const PeriodBounds& bounds);

struct RefineResult {
  DiscreteLoop loop;
  int iterations = 0;
  double grad_norm = 0.0;
  double last_step = 0.0;
  int null_directions = 0;
};

/// Newton iteration on the unpenalized gradient with an eigen pseudo-inverse.
/// Throws NotCritical if the candidate gradient exceeds 1e-3, Diverged when
/// the iterate drifts beyond escape_radius or does not settle, and
/// SingularHessian with more than 4 null directions.
RefineResult newton_refine(const MagneticSystem& system, double k, const DiscreteLoop& candidate,
                           const SolveOptions& opts);

struct AcceptedOrbit {
  DiscreteLoop loop;
  double action = 0.0;
  Criticality crit;
  double sigma = 0.0;
  std::string origin;
};

struct SigmaDiagnostics {
  double sigma = 0.0;
  int starts = 0;
  int descent_converged = 0;
  int refined = 0;
  int accepted = 0;
  int penalty_active = 0;
  int escaped = 0;
  int period_collapse = 0;
  int other_failures = 0;
};

struct FindResult {
  std::optional<AcceptedOrbit> best;
  std::vector<AcceptedOrbit> orbits;  // distinct accepted orbits, best first
  std::vector<SigmaDiagnostics> stages;
  PeriodBounds bounds;
  double l_alpha = 0.0;

  bool found() const { return best.has_value(); }
  std::string summary() const;
};

/// Runs the sigma schedule with a multistart at each level and stops at the
/// first level that yields an accepted orbit.
FindResult find_orbit(const MagneticSystem& system, double k, int winding, const SolveOptions& opts);

/// Shortest circle length |winding| * inf_x int sqrt(g22) dy over |x| <= x_extent.
double circle_length_estimate(const MagneticSystem& system, int winding, double x_extent);

/// Mean node x and mean momentum p_y of an orbit.
struct OrbitSummary {
  double x_mean = 0.0;
  double x_min = 0.0;
  double x_max = 0.0;
  double p_y = 0.0;
  double p_y_spread = 0.0;
};
OrbitSummary summarize_orbit(const MagneticSystem& system, const DiscreteLoop& loop);

}  // namespace magloop
