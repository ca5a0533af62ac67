#include "magloop/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <sstream>

#include "magloop/errors.hpp"
#include "magloop/parallel.hpp"

namespace magloop {

namespace {

struct Evaluated {
  double f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd g;       // gradient in (nodes, log T)
  double phys_norm = 0.0;  // norm of the gradient in (nodes, T)
};

Evaluated evaluate(const MagneticSystem& system, double k, const PenaltyFamily& penalty, const Eigen::VectorXd& z,
                   int winding) {
  Eigen::VectorXd packed = z;
  const Eigen::Index iT = z.size() - 1;
  packed(iT) = std::exp(z(iT));
  const DiscreteLoop loop = DiscreteLoop::unpack(packed, winding);
  Evaluated e;
  try {
    e.f = penalized_action(system, loop, k, penalty);
    e.g = gradient_vector(system, loop, k, &penalty);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::DegenerateMetric) throw;
    e.f = std::numeric_limits<double>::infinity();
    return e;
  }
  e.phys_norm = e.g.norm();
  e.g(iT) *= loop.T;
  return e;
}

DiscreteLoop from_log(const Eigen::VectorXd& z, int winding) {
  Eigen::VectorXd packed = z;
  packed(z.size() - 1) = std::exp(z(z.size() - 1));
  return DiscreteLoop::unpack(packed, winding);
}

}  // namespace

std::string to_string(DescentStatus s) {
  switch (s) {
    case DescentStatus::Converged: return "converged";
    case DescentStatus::IterationCap: return "iteration-cap";
    case DescentStatus::PeriodCollapse: return "period-collapse";
    case DescentStatus::Stalled: return "stalled";
  }
  return "unknown";
}

PeriodBounds period_bounds(double k, double A, double l_alpha, double theta_inf, double c_u, double B) {
  if (!(k > c_u)) {
    std::ostringstream os;
    os << "k = " << k << " does not exceed c_u = " << c_u;
    throw Error(ErrorKind::SubcriticalEnergy, os.str());
  }
  if (!(l_alpha > 0.0) || !(A > 0.0)) throw Error(ErrorKind::InvalidArgument, "period bounds need l > 0 and A > 0");
  PeriodBounds b;
  const double l2 = l_alpha * l_alpha;
  b.delta = 2.0 * l2 / (l2 + 4.0 * A + 4.0 * theta_inf * theta_inf);
  b.T_max = (A + B) / (k - c_u);
  return b;
}

DescentResult minimize_penalized(const MagneticSystem& system, double k, const PenaltyFamily& penalty,
                                 const DiscreteLoop& init, const SolveOptions& opts, const PeriodBounds& bounds) {
  init.validate();
  const int w = init.winding;
  const double s_lo = std::log(bounds.lower());
  const double s_hi = std::log(bounds.upper());
  Eigen::VectorXd z = init.packed();
  const Eigen::Index iT = z.size() - 1;
  z(iT) = std::clamp(std::log(init.T), s_lo, s_hi);

  Evaluated cur = evaluate(system, k, penalty, z, w);
  if (!std::isfinite(cur.f)) throw Error(ErrorKind::DegenerateMetric, "initial loop touches a degenerate metric");

  DescentResult res;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;
  int at_floor = 0;
  res.status = DescentStatus::IterationCap;
  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it;
    if (cur.phys_norm < opts.g_tol) {
      res.status = DescentStatus::Converged;
      break;
    }
    // two-loop recursion
    Eigen::VectorXd q = cur.g;
    std::vector<double> alpha(memory.size());
    for (int m = static_cast<int>(memory.size()) - 1; m >= 0; --m) {
      const auto& [s, y] = memory[m];
      alpha[m] = s.dot(q) / y.dot(s);
      q -= alpha[m] * y;
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      q *= s.dot(y) / y.dot(y);
    } else {
      q *= 1e-2 / std::max(1e-12, cur.g.lpNorm<Eigen::Infinity>());
    }
    for (std::size_t m = 0; m < memory.size(); ++m) {
      const auto& [s, y] = memory[m];
      const double beta = y.dot(q) / y.dot(s);
      q += (alpha[m] - beta) * s;
    }
    Eigen::VectorXd d = -q;
    if (d.dot(cur.g) >= 0.0) {
      memory.clear();
      d = -cur.g * (1e-2 / std::max(1e-12, cur.g.lpNorm<Eigen::Infinity>()));
    }
    const double dmax = d.lpNorm<Eigen::Infinity>();
    if (dmax > 0.25) d *= 0.25 / dmax;

    const double slope = d.dot(cur.g);
    double step = 1.0;
    Evaluated next;
    Eigen::VectorXd z_next;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      z_next = z + step * d;
      z_next(iT) = std::clamp(z_next(iT), s_lo, s_hi);
      next = evaluate(system, k, penalty, z_next, w);
      if (std::isfinite(next.f) && next.f <= cur.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!memory.empty()) {
        memory.clear();
        continue;
      }
      res.status = DescentStatus::Stalled;
      break;
    }
    const Eigen::VectorXd s = z_next - z;
    const Eigen::VectorXd y = next.g - cur.g;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      memory.emplace_back(s, y);
      if (static_cast<int>(memory.size()) > opts.memory) memory.pop_front();
    }
    z = z_next;
    cur = next;
    at_floor = z(iT) <= s_lo + 1e-12 ? at_floor + 1 : 0;
    if (at_floor >= opts.collapse_iterations) {
      res.status = DescentStatus::PeriodCollapse;
      break;
    }
  }
  res.loop = from_log(z, w);
  res.value = cur.f;
  res.grad_norm = cur.phys_norm;
  return res;
}

RefineResult newton_refine(const MagneticSystem& system, double k, const DiscreteLoop& candidate,
                           const SolveOptions& opts) {
  candidate.validate();
  const int w = candidate.winding;
  Eigen::VectorXd z = candidate.packed();
  const Eigen::VectorXd z0 = z;
  const Eigen::Index iT = z.size() - 1;
  RefineResult res;
  {
    const double g0 = gradient_vector(system, candidate, k).norm();
    if (g0 > 1e-3) throw Error(ErrorKind::NotCritical, "candidate gradient " + std::to_string(g0) + " above 1e-3");
  }
  for (int it = 0; it <= opts.newton_max_iterations; ++it) {
    const DiscreteLoop loop = DiscreteLoop::unpack(z, w);
    const Eigen::VectorXd g = gradient_vector(system, loop, k);
    const Eigen::MatrixXd H = hessian(system, loop, k);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double scale = lam.cwiseAbs().maxCoeff();
    Eigen::VectorXd coeff = eig.eigenvectors().transpose() * g;
    int null_dirs = 0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      if (std::abs(lam(i)) <= 1e-10 * scale) {
        coeff(i) = 0.0;
        ++null_dirs;
      } else {
        coeff(i) /= lam(i);
      }
    }
    if (null_dirs > 4)
      throw Error(ErrorKind::SingularHessian, std::to_string(null_dirs) + " null directions at the candidate");
    Eigen::VectorXd step = -(eig.eigenvectors() * coeff);
    res.iterations = it;
    res.grad_norm = g.norm();
    res.null_directions = null_dirs;
    res.last_step = step.lpNorm<Eigen::Infinity>();
    if (res.grad_norm < opts.newton_tol && res.last_step <= opts.newton_step_tol) {
      res.loop = loop;
      return res;
    }
    if (it == opts.newton_max_iterations) break;
    const double norm = step.norm();
    if (norm > opts.trust_radius) step *= opts.trust_radius / norm;
    while (z(iT) + step(iT) <= 0.5 * z(iT)) step *= 0.5;
    z += step;
    const double drift = (z - z0).head(iT).lpNorm<Eigen::Infinity>();
    if (drift > opts.escape_radius || std::abs(std::log(z(iT) / z0(iT))) > std::log(4.0))
      throw Error(ErrorKind::Diverged, "Newton iterate escaped the candidate neighbourhood");
  }
  throw Error(ErrorKind::Diverged, "Newton iteration did not settle (gradient " + std::to_string(res.grad_norm) +
                                       ", step " + std::to_string(res.last_step) + ")");
}

double circle_length_estimate(const MagneticSystem& system, int winding, double x_extent) {
  double best = std::numeric_limits<double>::infinity();
  const int samples = 801;
  for (int i = 0; i < samples; ++i) {
    const double x = -x_extent + 2.0 * x_extent * i / (samples - 1);
    try {
      best = std::min(best, loop_length(system, DiscreteLoop::circle(x, winding, 64, 1.0)));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateMetric) throw;
    }
  }
  return best;
}

OrbitSummary summarize_orbit(const MagneticSystem& system, const DiscreteLoop& loop) {
  OrbitSummary s;
  const int N = loop.N();
  s.x_min = std::numeric_limits<double>::infinity();
  s.x_max = -s.x_min;
  double pmin = s.x_min;
  double pmax = -s.x_min;
  for (int j = 0; j < N; ++j) {
    const double x = loop.nodes[j].x();
    s.x_mean += x / N;
    s.x_min = std::min(s.x_min, x);
    s.x_max = std::max(s.x_max, x);
    const Vec2 a = loop.node(j);
    const Vec2 b = loop.node(j + 1);
    const LocalGeometry geo = system.local(0.5 * (a + b));
    const Vec2 v = (b - a) * (N / loop.T);
    const double py = (geo.G * v + geo.theta)(1);
    s.p_y += py / N;
    pmin = std::min(pmin, py);
    pmax = std::max(pmax, py);
  }
  s.p_y_spread = pmax - pmin;
  return s;
}

std::string FindResult::summary() const {
  std::ostringstream os;
  os << "l_alpha=" << l_alpha << " period window=[" << bounds.lower() << ", " << bounds.upper() << "]\n";
  for (const auto& st : stages) {
    os << "sigma=" << st.sigma << " starts=" << st.starts << " descent_converged=" << st.descent_converged
       << " refined=" << st.refined << " accepted=" << st.accepted << " penalty_active=" << st.penalty_active
       << " escaped=" << st.escaped << " period_collapse=" << st.period_collapse
       << " other_failures=" << st.other_failures << "\n";
  }
  return os.str();
}

FindResult find_orbit(const MagneticSystem& system, double k, int winding, const SolveOptions& opts) {
  if (winding == 0) throw Error(ErrorKind::InvalidArgument, "find_orbit needs a nonzero winding");
  if (opts.sigma_schedule.empty()) throw Error(ErrorKind::InvalidArgument, "empty sigma schedule");
  for (std::size_t i = 1; i < opts.sigma_schedule.size(); ++i)
    if (!(opts.sigma_schedule[i] > opts.sigma_schedule[i - 1]))
      throw Error(ErrorKind::InvalidArgument, "sigma schedule must be strictly increasing");

  FindResult out;
  const double sigma_max = opts.sigma_schedule.back();
  out.l_alpha = opts.l_alpha ? *opts.l_alpha : circle_length_estimate(system, winding, sigma_max);
  double theta_inf = 0.0;
  if (opts.theta_inf) {
    theta_inf = *opts.theta_inf;
  } else if (system.theta_sup()) {
    theta_inf = *system.theta_sup();
  } else {
    theta_inf = theta_norm_bounds(system, -sigma_max, sigma_max, 801).theta;
  }
  out.bounds = period_bounds(k, opts.action_cap, out.l_alpha, theta_inf, opts.c_u_estimate, opts.action_offset);

  struct Start {
    DiscreteLoop loop;
    std::string origin;
  };
  std::vector<Start> scan_starts;
  if (opts.scan_seeds) {
    const ScanResult scan = poincare_scan(system, k, winding, opts.scan);
    for (const auto& fp : scan.fixed_points) {
      std::ostringstream os;
      os.precision(6);
      os << "scan x=" << fp.x << " vx=" << fp.vx;
      scan_starts.push_back({loop_from_fixed_point(system, k, winding, fp, opts.N), os.str()});
    }
  }

  for (std::size_t si = 0; si < opts.sigma_schedule.size(); ++si) {
    const double sigma = opts.sigma_schedule[si];
    const PenaltyFamily penalty{sigma, opts.penalty_center, opts.penalty_power};
    std::vector<Start> starts;
    for (std::size_t i = 0; i < opts.x_inits.size(); ++i) {
      const double x0 = opts.x_inits[i];
      DiscreteLoop c = DiscreteLoop::circle(x0, winding, opts.N, 1.0);
      const double L = loop_length(system, c);
      c.T = std::clamp(L / std::sqrt(2.0 * k), out.bounds.lower(), out.bounds.upper());
      std::mt19937_64 rng(opts.seed * 1000003ULL + si * 1009ULL + i);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (auto& node : c.nodes) node += opts.perturbation * Vec2(u(rng), u(rng));
      std::ostringstream os;
      os << "circle x=" << x0;
      starts.push_back({std::move(c), os.str()});
    }
    for (const auto& s : scan_starts) starts.push_back(s);

    enum class Outcome { Accepted, PenaltyActive, Escaped, Collapse, Other };
    struct Slot {
      Outcome outcome = Outcome::Other;
      bool descent_converged = false;
      bool refined = false;
      std::optional<AcceptedOrbit> orbit;
    };
    std::vector<Slot> slots(starts.size());
    parallel_for(static_cast<int>(starts.size()), opts.threads, [&](int i) {
      Slot& slot = slots[i];
      DescentResult desc;
      try {
        desc = minimize_penalized(system, k, penalty, starts[i].loop, opts, out.bounds);
      } catch (const Error&) {
        slot.outcome = Outcome::Other;
        return;
      }
      slot.descent_converged = desc.status == DescentStatus::Converged;
      if (desc.status == DescentStatus::PeriodCollapse) {
        slot.outcome = Outcome::Collapse;
        return;
      }
      bool touches = false;
      for (const auto& n : desc.loop.nodes) touches = touches || penalty.value(n) > 0.0;
      RefineResult ref;
      try {
        ref = newton_refine(system, k, desc.loop, opts);
      } catch (const Error& e) {
        if (touches) {
          slot.outcome = Outcome::PenaltyActive;
        } else if (e.kind() == ErrorKind::Diverged) {
          slot.outcome = Outcome::Escaped;
        } else {
          slot.outcome = Outcome::Other;
        }
        return;
      }
      slot.refined = true;
      const DiscreteLoop& loop = ref.loop;
      const double limit = sigma - opts.acceptance_margin;
      bool inside = true;
      for (const auto& n : loop.nodes)
        inside = inside && std::abs(n.x() - opts.penalty_center) < limit && penalty.value(n) == 0.0;
      if (!inside) {
        slot.outcome = Outcome::PenaltyActive;
        return;
      }
      const Criticality crit = criticality(system, loop, k);
      const double speed_limit = 1e-6 * 2.0 * k * loop.T * loop.T;
      if (!(crit.el_residual < 1e-6 * std::sqrt(2.0 * k)) || !(crit.speed_residual < speed_limit)) {
        slot.outcome = Outcome::Other;
        return;
      }
      slot.outcome = Outcome::Accepted;
      slot.orbit = AcceptedOrbit{loop, action(system, loop, k), crit, sigma, starts[i].origin};
    });

    SigmaDiagnostics diag;
    diag.sigma = sigma;
    diag.starts = static_cast<int>(starts.size());
    std::vector<AcceptedOrbit> accepted;
    for (const auto& slot : slots) {
      diag.descent_converged += slot.descent_converged;
      diag.refined += slot.refined;
      switch (slot.outcome) {
        case Outcome::Accepted:
          ++diag.accepted;
          accepted.push_back(*slot.orbit);
          break;
        case Outcome::PenaltyActive: ++diag.penalty_active; break;
        case Outcome::Escaped: ++diag.escaped; break;
        case Outcome::Collapse: ++diag.period_collapse; break;
        case Outcome::Other: ++diag.other_failures; break;
      }
    }
    out.stages.push_back(diag);
    if (accepted.empty()) continue;

    std::stable_sort(accepted.begin(), accepted.end(), [](const AcceptedOrbit& a, const AcceptedOrbit& b) {
      if (a.action != b.action) return a.action < b.action;
      return a.crit.el_residual < b.crit.el_residual;
    });
    for (const auto& orb : accepted) {
      const OrbitSummary s = summarize_orbit(system, orb.loop);
      bool duplicate = false;
      for (const auto& kept : out.orbits) {
        const OrbitSummary t = summarize_orbit(system, kept.loop);
        if (std::abs(kept.action - orb.action) < 1e-8 && std::abs(s.x_min - t.x_min) < 1e-6 &&
            std::abs(s.x_max - t.x_max) < 1e-6)
          duplicate = true;
      }
      if (!duplicate) out.orbits.push_back(orb);
    }
    out.best = out.orbits.front();
    break;
  }
  return out;
}

}  // namespace magloop
