#include "magloop/index.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "magloop/errors.hpp"
#include "magloop/parallel.hpp"

namespace magloop {

SpectralCounts hessian_counts(const MagneticSystem& system, const DiscreteLoop& loop, double k, double tol,
                              bool with_period) {
  Eigen::MatrixXd H = hessian(system, loop, k);
  Eigen::MatrixXd M = loop_metric(system, loop);
  if (!with_period) {
    const Eigen::Index n = H.rows() - 1;
    H = H.topLeftCorner(n, n).eval();
    M = M.topLeftCorner(n, n).eval();
  }
  // Sylvester: the pencil's inertia equals that of H; M only fixes the scale.
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::DegenerateMetric, "loop metric is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd C = L.triangularView<Eigen::Lower>().solve(H);
  C = L.triangularView<Eigen::Lower>().solve(C.transpose()).transpose().eval();
  C = 0.5 * (C + C.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const double scale = lam.cwiseAbs().maxCoeff();
  SpectralCounts out;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -tol * scale) {
      ++out.negative;
    } else if (lam(i) <= tol * scale) {
      ++out.null;
    }
  }
  return out;
}

std::pair<int, int> morse_index(const MagneticSystem& system, const DiscreteLoop& orbit, double k, double tol_null) {
  const SpectralCounts c = hessian_counts(system, orbit, k, tol_null, true);
  return {c.negative, c.null};
}

std::pair<int, int> fixed_period_index(const MagneticSystem& system, const DiscreteLoop& orbit, double k,
                                       double tol_null) {
  const SpectralCounts c = hessian_counts(system, orbit, k, tol_null, false);
  return {c.negative, c.null};
}

int monodromy_nullity(const Mat4& D, int n, double tol) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "iterate count must be positive");
  const double scale = std::max(1.0, Eigen::JacobiSVD<Mat4>(D).singularValues()(0));
  const Eigen::Matrix4cd Dc = D.cast<std::complex<double>>();
  int total = 0;
  for (int r = 0; r < n; ++r) {
    const std::complex<double> z = std::polar(1.0, 2.0 * std::numbers::pi * r / n);
    const Eigen::Matrix4cd A = z * Eigen::Matrix4cd::Identity() - Dc;
    const Eigen::Vector4d sv = Eigen::JacobiSVD<Eigen::Matrix4cd>(A).singularValues();
    for (int i = 0; i < 4; ++i) total += sv(i) < tol * scale;
  }
  return total;
}

MeanIndex mean_index(const MagneticSystem& system, const DiscreteLoop& orbit, double k, const Monodromy& mono,
                     const IndexOptions& opts) {
  if (opts.n_max < 1) throw Error(ErrorKind::InvalidArgument, "n_max must be positive");
  if (static_cast<long>(opts.n_max) * orbit.N() > opts.max_total_nodes) {
    std::ostringstream os;
    os << "n_max * N = " << static_cast<long>(opts.n_max) * orbit.N() << " exceeds " << opts.max_total_nodes;
    throw Error(ErrorKind::BudgetExceeded, os.str());
  }
  MeanIndex out;
  out.table.resize(opts.n_max);
  parallel_for(opts.n_max, opts.threads, [&](int i) {
    const int n = i + 1;
    const DiscreteLoop it = iterate_loop(orbit, n);
    const SpectralCounts free = hessian_counts(system, it, k, opts.tol_null, true);
    const SpectralCounts fixed = hessian_counts(system, it, k, opts.tol_null, false);
    out.table[i] = IterateIndex{n, free.negative, free.null, fixed.negative, fixed.null,
                                monodromy_nullity(mono.D, n)};
  });
  if (opts.n_max == 1) {
    out.mhat = out.table[0].m;
  } else {
    double sn = 0, sm = 0, snn = 0, snm = 0;
    for (const auto& row : out.table) {
      sn += row.n;
      sm += row.m;
      snn += static_cast<double>(row.n) * row.n;
      snm += static_cast<double>(row.n) * row.m;
    }
    const double cnt = static_cast<double>(out.table.size());
    out.mhat = std::max(0.0, (cnt * snm - sn * sm) / (cnt * snn - sn * sn));
  }
  out.rotation = rotation_mean_index(mono, opts.n_max);
  out.flagged = std::abs(out.mhat - out.rotation) > 0.5;
  return out;
}

IndexReport index_report(const MagneticSystem& system, const DiscreteLoop& orbit, double k,
                         const IndexOptions& opts) {
  const Criticality crit = criticality(system, orbit, k);
  if (crit.el_residual > opts.max_el_residual)
    throw Error(ErrorKind::NotCritical, "EL residual " + std::to_string(crit.el_residual) + " too large");
  if (crit.speed_residual > opts.max_el_residual * std::max(1.0, 2.0 * k * orbit.T * orbit.T))
    throw Error(ErrorKind::NotCritical, "speed residual " + std::to_string(crit.speed_residual) + " off the energy level");
  const Monodromy mono = monodromy(system, orbit, k);
  const MeanIndex mi = mean_index(system, orbit, k, mono, opts);
  IndexReport r;
  r.table = mi.table;
  r.m = mi.table[0].m;
  r.m0 = mi.table[0].m0;
  r.mT = mi.table[0].mT;
  r.mT0 = mi.table[0].mT0;
  r.m0_monodromy = mi.table[0].m0_monodromy;
  r.mhat = mi.mhat;
  r.mhat_rotation = mi.rotation;
  r.mhat_flagged = mi.flagged;
  r.null_tolerance = opts.tol_null;
  r.monodromy_eigenvalues = mono.eigenvalues;
  r.poincare_eigenvalues = mono.poincare_eigenvalues;
  return r;
}

namespace {

InequalityCheck check_rows(const std::vector<IterateIndex>& rows, double mhat, int dimM, int stride) {
  constexpr double eps = 1e-9;
  InequalityCheck out;
  std::ostringstream os;
  for (const auto& row : rows) {
    if (row.n % stride != 0) continue;
    const double n = static_cast<double>(row.n / stride);
    const double lo = n * mhat - dimM;
    const double hi = n * mhat + dimM - row.m0 + 1;
    if (row.m < lo - eps || row.m > hi + eps) {
      out.pass = false;
      out.violations.push_back(row.n);
      os << "n=" << row.n << ": m=" << row.m << " outside [" << lo << ", " << hi << "]; ";
    }
  }
  out.detail = os.str();
  return out;
}

}  // namespace

InequalityCheck check_iteration_inequalities(const IndexReport& report, int dimM) {
  return check_rows(report.table, report.mhat, dimM, 1);
}

InequalityCheck check_doubled_inequalities(const IndexReport& report, int dimM) {
  return check_rows(report.table, 2.0 * report.mhat, dimM, 2);
}

std::vector<std::string> check_report_invariants(const IndexReport& report, int dimM) {
  std::vector<std::string> failures;
  auto check = [&](bool ok, const IterateIndex& row, const char* what) {
    if (!ok) failures.push_back("n=" + std::to_string(row.n) + ": " + what);
  };
  for (const auto& row : report.table) {
    check(row.m - row.mT >= 0 && row.m - row.mT <= 1, row, "0 <= m - mT <= 1");
    check(row.mT0 - 1 <= row.m0 && row.m0 <= row.mT0 && row.mT0 <= 2 * dimM, row, "mT0 - 1 <= m0 <= mT0 <= 2 dimM");
    check(row.mT0 == row.m0_monodromy, row, "mT0 = dim ker(I - D^n)");
    check(row.m0 >= 1, row, "m0 >= 1");
  }
  return failures;
}

std::optional<long> vanishing_threshold(int q, int dimM, const std::vector<double>& mean_indices) {
  if (q < dimM + 2) throw Error(ErrorKind::InvalidArgument, "vanishing threshold needs q >= dimM + 2");
  const double budget = static_cast<double>(q + dimM);
  std::optional<long> best;
  for (double mh : mean_indices) {
    if (!std::isfinite(mh) || mh < 0.0) throw Error(ErrorKind::InvalidArgument, "mean indices must be >= 0");
    if (mh == 0.0) continue;
    // largest l with l * mh <= q + dimM, guarded against rounding of the quotient
    long l = static_cast<long>(std::floor(budget / mh));
    while (static_cast<double>(l + 1) * mh <= budget) ++l;
    while (l > 0 && static_cast<double>(l) * mh > budget) --l;
    best = best ? std::max(*best, l) : l;
  }
  if (!best) return std::nullopt;
  return 1 + *best;
}

bool escape_index_bound(const IndexReport& report, int dimM) { return report.m + report.m0 <= 2 * dimM + 1; }

}  // namespace magloop
