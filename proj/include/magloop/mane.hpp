#pragma once

#include <optional>
#include <string>
#include <vector>

#include "magloop/geometry.hpp"
#include "magloop/loopspace.hpp"

namespace magloop {

struct UpperOptions {
  double x_lo = -20.0;
  double x_hi = 20.0;
  int grid = 512;           // evaluation grid on [x_lo, x_hi]
  int refine = 4;           // validation points per grid interval
  int u_basis_size = 64;    // cells of the piecewise-constant u'
  std::vector<double> tails{40.0, 80.0};  // |x| of extra points where u' is clamped
  int y_samples = 16;       // used only for y-dependent systems
};

struct UpperBound {
  double value = 0.0;
  double closed_form = 0.0;  // c of the added closed form c dy (universal cover only)
  std::vector<double> cell_edges;
  std::vector<double> u_prime;  // per cell
  bool asymmetric = false;      // system depends on y: u = u(x) is only a heuristic
};

/// inf over piecewise-constant u'(x) of sup_q H(q, u'(x) dx); the sup runs
/// over every validation point, so the returned value is attained by the
/// returned profile.
UpperBound mane_upper_infsup(const MagneticSystem& system, const UpperOptions& opts = {});

/// Same with p = u'(x) dx + c dy and an outer minimization over c, which is
/// admissible on the universal cover.
UpperBound mane_upper_universal(const MagneticSystem& system, const UpperOptions& opts = {});

enum class WitnessFamily { Circles, Rectangles };

struct WitnessOptions {
  int N = 128;
  double r_extent = 20.0;
  int r_samples = 161;
  std::vector<int> windings{1, -1, 2, -2};
  double tol = 1e-10;
};

struct Witness {
  DiscreteLoop loop;
  double action = 0.0;
  std::string description;
};

/// Searches the family for a loop with S_{L+k} < -tol at its optimal period.
std::optional<Witness> mane_lower_witness(const MagneticSystem& system, double k, WitnessFamily family,
                                          const WitnessOptions& opts = {});

/// Optimal-period action 2 sqrt(k K) + flux of a loop shape (K, flux at T = 1).
/// Sets loop.T to the optimal period.
double optimal_period_action(const MagneticSystem& system, DiscreteLoop& loop, double k);

/// Winding-0 rectangle [a, b] x [0, h] traversed with the given orientation.
DiscreteLoop rectangle_loop(const MagneticSystem& system, double a, double b, double h, int orientation, int N);

enum class BracketStatus { Converged, BudgetExceeded };
std::string to_string(BracketStatus s);

struct CriticalValueBracket {
  double lower = 0.0;
  double upper = 0.0;
  std::optional<Witness> witness;
  UpperBound profile;
  BracketStatus status = BracketStatus::Converged;
  int iterations = 0;
  bool universal = false;
};

struct BracketOptions {
  UpperOptions upper;
  WitnessOptions witness;
  int max_iterations = 60;
};

/// Bracket for c (all windings): upper from u = u(x), lower from circle and
/// rectangle witnesses, by bisection in k.
CriticalValueBracket estimate_c(const MagneticSystem& system, double tol, const BracketOptions& opts = {});
/// Bracket for c_u: upper on the universal cover, lower from winding-0 witnesses.
CriticalValueBracket estimate_c_u(const MagneticSystem& system, double tol, const BracketOptions& opts = {});

}  // namespace magloop
