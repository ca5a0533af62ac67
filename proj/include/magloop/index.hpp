#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "magloop/dynamics.hpp"
#include "magloop/loopspace.hpp"

namespace magloop {

inline constexpr double kNullTolerance = 1e-6;
inline constexpr double kMonodromyKernelTolerance = 1e-5;

struct IterateIndex {
  int n = 1;
  int m = 0;
  int m0 = 0;
  int mT = 0;
  int mT0 = 0;
  int m0_monodromy = 0;
};

struct IndexReport {
  int m = 0;
  int m0 = 0;
  int mT = 0;
  int mT0 = 0;
  int m0_monodromy = 0;
  double mhat = 0.0;
  double mhat_rotation = 0.0;
  bool mhat_flagged = false;  // slope and rotation estimates differ by more than 0.5
  std::vector<IterateIndex> table;
  double null_tolerance = kNullTolerance;
  Eigen::Vector4cd monodromy_eigenvalues = Eigen::Vector4cd::Zero();
  Eigen::Vector2cd poincare_eigenvalues = Eigen::Vector2cd::Zero();
};

struct SpectralCounts {
  int negative = 0;
  int null = 0;
};

/// Counts of the pencil H v = lambda M v below -tol*scale and within
/// +-tol*scale, with scale the largest |lambda| and M the discrete W^{1,2}
/// metric. Set `with_period` false to drop the period row and column.
SpectralCounts hessian_counts(const MagneticSystem& system, const DiscreteLoop& loop, double k, double tol,
                              bool with_period);

std::pair<int, int> morse_index(const MagneticSystem& system, const DiscreteLoop& orbit, double k,
                                double tol_null = kNullTolerance);
std::pair<int, int> fixed_period_index(const MagneticSystem& system, const DiscreteLoop& orbit, double k,
                                       double tol_null = kNullTolerance);

/// dim ker(I - D^n), as the sum over n-th roots of unity z of dim ker(zI - D).
int monodromy_nullity(const Mat4& D, int n, double tol = kMonodromyKernelTolerance);

struct IndexOptions {
  int n_max = 12;
  int max_total_nodes = 2048;
  double tol_null = kNullTolerance;
  double max_el_residual = 1e-5;
  int threads = 1;
};

struct MeanIndex {
  double mhat = 0.0;
  double rotation = 0.0;
  bool flagged = false;
  std::vector<IterateIndex> table;
};

/// Tabulates indices of the iterates n = 1..n_max and fits the mean index.
/// Throws BudgetExceeded when n_max * N exceeds the node budget.
MeanIndex mean_index(const MagneticSystem& system, const DiscreteLoop& orbit, double k, const Monodromy& mono,
                     const IndexOptions& opts = {});

/// Full report; throws NotCritical when the orbit is not refined.
IndexReport index_report(const MagneticSystem& system, const DiscreteLoop& orbit, double k,
                         const IndexOptions& opts = {});

struct InequalityCheck {
  bool pass = true;
  std::vector<int> violations;  // offending n
  std::string detail;
};

/// n mhat - dimM <= m(n) <= n mhat + dimM - m0(n) + 1 for every tabulated n.
InequalityCheck check_iteration_inequalities(const IndexReport& report, int dimM = 2);
/// The same inequalities applied to the doubled orbit (entries with even n).
InequalityCheck check_doubled_inequalities(const IndexReport& report, int dimM = 2);

/// Structural identities of a report: index/nullity relations and the
/// monodromy kernel identity. Returns a list of failed checks.
std::vector<std::string> check_report_invariants(const IndexReport& report, int dimM = 2);

/// 1 + max floor((q + dimM) / mhat_i) over nonzero mhat_i, nullopt if all vanish.
std::optional<long> vanishing_threshold(int q, int dimM, const std::vector<double>& mean_indices);

/// m + m0 <= 2 dimM + 1.
bool escape_index_bound(const IndexReport& report, int dimM = 2);

}  // namespace magloop
