#include "magloop/mane.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "magloop/errors.hpp"

namespace magloop {

namespace {

// H(u) = 1/2 [a (u - t1)^2 + 2 b (u - t1)(c - t2) + d (c - t2)^2] with (a, b, d) = G^{-1}
struct Sample {
  double x = 0.0;
  double a = 0.0, b = 0.0, d = 0.0;
  double t1 = 0.0, t2 = 0.0;
  int cell = 0;

  double h(double u, double c) const {
    const double du = u - t1;
    const double dc = c - t2;
    return 0.5 * (a * du * du + 2.0 * b * du * dc + d * dc * dc);
  }
  double argmin(double c) const { return t1 - b / a * (c - t2); }
};

struct Layout {
  std::vector<std::vector<Sample>> cells;
  std::vector<double> edges;
  bool asymmetric = false;
  double t2_min = 0.0;
  double t2_max = 0.0;
};

Layout build_layout(const MagneticSystem& system, const UpperOptions& opts) {
  if (opts.grid < 2 || opts.refine < 1 || opts.u_basis_size < 1 || !(opts.x_hi > opts.x_lo))
    throw Error(ErrorKind::InvalidArgument, "invalid inf-sup grid");
  Layout lay;
  lay.asymmetric = !system.y_symmetric();
  const int ny = lay.asymmetric ? std::max(1, opts.y_samples) : 1;
  const int n = opts.u_basis_size;
  lay.cells.resize(n);
  for (int i = 0; i <= n; ++i) lay.edges.push_back(opts.x_lo + (opts.x_hi - opts.x_lo) * i / n);

  std::vector<double> xs;
  const int pts = (opts.grid - 1) * opts.refine + 1;
  for (int i = 0; i < pts; ++i) xs.push_back(opts.x_lo + (opts.x_hi - opts.x_lo) * i / (pts - 1));
  for (double t : opts.tails) {
    if (-t < opts.x_lo) xs.push_back(-t);
    if (t > opts.x_hi) xs.push_back(t);
  }
  lay.t2_min = std::numeric_limits<double>::infinity();
  lay.t2_max = -lay.t2_min;
  for (double x : xs) {
    int cell = static_cast<int>(std::floor(n * (x - opts.x_lo) / (opts.x_hi - opts.x_lo)));
    cell = std::clamp(cell, 0, n - 1);
    for (int j = 0; j < ny; ++j) {
      const LocalGeometry geo = system.local(Vec2(x, static_cast<double>(j) / ny));
      Sample s;
      s.x = x;
      s.a = geo.Ginv(0, 0);
      s.b = geo.Ginv(0, 1);
      s.d = geo.Ginv(1, 1);
      s.t1 = geo.theta(0);
      s.t2 = geo.theta(1);
      s.cell = cell;
      lay.t2_min = std::min(lay.t2_min, s.t2);
      lay.t2_max = std::max(lay.t2_max, s.t2);
      lay.cells[cell].push_back(s);
    }
  }
  return lay;
}

template <class F>
double golden_min(F&& f, double lo, double hi, int iterations, double* arg) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double x1 = b - r * (b - a);
  double x2 = a + r * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int i = 0; i < iterations && b - a > 0.0; ++i) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    }
  }
  const double best = f1 <= f2 ? x1 : x2;
  if (arg) *arg = best;
  return std::min(f1, f2);
}

double cell_max(const std::vector<Sample>& cell, double u, double c) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& s : cell) m = std::max(m, s.h(u, c));
  return m;
}

// min over u of the max of convex quadratics; the minimizer lies between
// the individual minimizers.
double cell_minmax(const std::vector<Sample>& cell, double c, double* u_best) {
  if (cell.empty()) {
    *u_best = 0.0;
    return -std::numeric_limits<double>::infinity();
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : cell) {
    lo = std::min(lo, s.argmin(c));
    hi = std::max(hi, s.argmin(c));
  }
  if (hi - lo <= 0.0) {
    *u_best = lo;
    return cell_max(cell, lo, c);
  }
  double u = lo;
  golden_min([&](double v) { return cell_max(cell, v, c); }, lo, hi, 200, &u);
  *u_best = u;
  return cell_max(cell, u, c);
}

double profile_value(const Layout& lay, double c, std::vector<double>* u_prime) {
  double value = -std::numeric_limits<double>::infinity();
  if (u_prime) u_prime->assign(lay.cells.size(), 0.0);
  for (std::size_t i = 0; i < lay.cells.size(); ++i) {
    double u = 0.0;
    value = std::max(value, cell_minmax(lay.cells[i], c, &u));
    if (u_prime) (*u_prime)[i] = u;
  }
  return value;
}

// Outward rounding so that the reported value bounds the exact sup.
double round_up(double v) { return v + 1e-12 * std::max(1.0, std::abs(v)); }

}  // namespace

UpperBound mane_upper_infsup(const MagneticSystem& system, const UpperOptions& opts) {
  const Layout lay = build_layout(system, opts);
  UpperBound out;
  out.asymmetric = lay.asymmetric;
  out.cell_edges = lay.edges;
  out.value = round_up(profile_value(lay, 0.0, &out.u_prime));
  return out;
}

UpperBound mane_upper_universal(const MagneticSystem& system, const UpperOptions& opts) {
  const Layout lay = build_layout(system, opts);
  UpperBound out;
  out.asymmetric = lay.asymmetric;
  out.cell_edges = lay.edges;
  double c = 0.0;
  if (lay.t2_max > lay.t2_min) {
    golden_min([&](double cc) { return profile_value(lay, cc, nullptr); }, lay.t2_min, lay.t2_max, 300, &c);
  } else {
    c = lay.t2_min;
  }
  out.closed_form = c;
  out.value = round_up(profile_value(lay, c, &out.u_prime));
  return out;
}

double optimal_period_action(const MagneticSystem& system, DiscreteLoop& loop, double k) {
  const ActionParts p = action_parts(system, loop);
  if (!(k > 0.0) || !(p.kinetic > 0.0)) {
    loop.T = 1.0;
    return action(system, loop, k);
  }
  loop.T = std::sqrt(p.kinetic / k);
  return 2.0 * std::sqrt(k * p.kinetic) + p.flux;
}

DiscreteLoop rectangle_loop(const MagneticSystem& system, double a, double b, double h, int orientation, int N) {
  const Vec2 corners[4] = {{a, 0.0}, {b, 0.0}, {b, h}, {a, h}};
  double len[4];
  double total = 0.0;
  for (int s = 0; s < 4; ++s) {
    const Vec2 p = corners[s];
    const Vec2 q = corners[(s + 1) % 4];
    double l = 0.0;
    const int sub = 16;
    for (int i = 0; i < sub; ++i) {
      const Vec2 m = p + (q - p) * ((i + 0.5) / sub);
      const Vec2 d = (q - p) / sub;
      l += std::sqrt(d.dot(system.chart().metric(m) * d));
    }
    len[s] = l;
    total += l;
  }
  int count[4];
  int used = 0;
  for (int s = 0; s < 4; ++s) {
    count[s] = std::max(2, static_cast<int>(std::lround(N * len[s] / total)));
    used += count[s];
  }
  while (used != N) {
    int s = static_cast<int>(std::max_element(count, count + 4) - count);
    if (used > N) {
      --count[s];
      --used;
    } else {
      ++count[s];
      ++used;
    }
  }
  DiscreteLoop loop;
  loop.winding = 0;
  loop.T = 1.0;
  for (int s = 0; s < 4; ++s) {
    const Vec2 p = corners[s];
    const Vec2 q = corners[(s + 1) % 4];
    for (int i = 0; i < count[s]; ++i) loop.nodes.push_back(p + (q - p) * (static_cast<double>(i) / count[s]));
  }
  if (orientation < 0) std::reverse(loop.nodes.begin(), loop.nodes.end());
  return loop;
}

std::optional<Witness> mane_lower_witness(const MagneticSystem& system, double k, WitnessFamily family,
                                          const WitnessOptions& opts) {
  std::optional<Witness> best;
  auto consider = [&](DiscreteLoop loop, const std::string& desc) {
    double S;
    try {
      S = optimal_period_action(system, loop, k);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateMetric) throw;
      return std::numeric_limits<double>::infinity();
    }
    if (!best || S < best->action) best = Witness{std::move(loop), S, desc};
    return S;
  };

  if (family == WitnessFamily::Circles) {
    for (int w : opts.windings) {
      double r_best = 0.0;
      double s_best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < opts.r_samples; ++i) {
        const double r = -opts.r_extent + 2.0 * opts.r_extent * i / std::max(1, opts.r_samples - 1);
        std::ostringstream os;
        os << "circle r=" << r << " winding=" << w;
        const double S = consider(DiscreteLoop::circle(r, w, opts.N, 1.0), os.str());
        if (S < s_best) {
          s_best = S;
          r_best = r;
        }
      }
      const double dr = 2.0 * opts.r_extent / std::max(1, opts.r_samples - 1);
      const double lo = std::max(-opts.r_extent, r_best - dr);
      const double hi = std::min(opts.r_extent, r_best + dr);
      double r = r_best;
      golden_min(
          [&](double rr) {
            DiscreteLoop c = DiscreteLoop::circle(rr, w, opts.N, 1.0);
            return optimal_period_action(system, c, k);
          },
          lo, hi, 60, &r);
      std::ostringstream os;
      os << "circle r=" << r << " winding=" << w;
      consider(DiscreteLoop::circle(r, w, opts.N, 1.0), os.str());
    }
  } else {
    const double starts[] = {-20, -10, -5, -3, -2, -1, -0.5, 0, 0.5, 1, 2, 3, 5, 10};
    const double widths[] = {0.25, 0.5, 1, 2, 5, 10, 20, 30};
    const double heights[] = {0.5, 1, 2, 5, 10, 100, 1000};
    for (double a : starts)
      for (double wd : widths)
        for (double h : heights)
          for (int o : {1, -1}) {
            std::ostringstream os;
            os << "rectangle [" << a << ", " << a + wd << "] x [0, " << h << "] orientation " << o;
            consider(rectangle_loop(system, a, a + wd, h, o, std::max(opts.N, 16)), os.str());
          }
  }
  if (best && best->action < -opts.tol) return best;
  return std::nullopt;
}

std::string to_string(BracketStatus s) {
  return s == BracketStatus::Converged ? "converged" : "budget-exceeded";
}

namespace {

template <class Search>
CriticalValueBracket bisect(const UpperBound& upper, double tol, int max_iterations, Search&& search) {
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "bracket tolerance must be positive");
  CriticalValueBracket out;
  out.profile = upper;
  out.upper = upper.value;
  double lo = 0.0;
  double hi = upper.value;
  out.status = BracketStatus::BudgetExceeded;
  for (int it = 0; it < max_iterations; ++it) {
    out.iterations = it;
    if (out.upper - lo <= tol) {
      out.status = BracketStatus::Converged;
      break;
    }
    if (hi - lo <= 1e-3 * tol) break;
    const double mid = 0.5 * (lo + hi);
    auto w = search(mid);
    if (w) {
      lo = mid;
      out.witness = std::move(w);
    } else {
      hi = mid;
    }
  }
  if (out.status != BracketStatus::Converged && out.upper - lo <= tol) out.status = BracketStatus::Converged;
  out.lower = lo;
  return out;
}

}  // namespace

CriticalValueBracket estimate_c(const MagneticSystem& system, double tol, const BracketOptions& opts) {
  const UpperBound upper = mane_upper_infsup(system, opts.upper);
  auto out = bisect(upper, tol, opts.max_iterations, [&](double k) {
    auto w = mane_lower_witness(system, k, WitnessFamily::Circles, opts.witness);
    if (!w) w = mane_lower_witness(system, k, WitnessFamily::Rectangles, opts.witness);
    return w;
  });
  out.universal = false;
  return out;
}

CriticalValueBracket estimate_c_u(const MagneticSystem& system, double tol, const BracketOptions& opts) {
  const UpperBound upper = mane_upper_universal(system, opts.upper);
  auto out = bisect(upper, tol, opts.max_iterations, [&](double k) {
    return mane_lower_witness(system, k, WitnessFamily::Rectangles, opts.witness);
  });
  out.universal = true;
  return out;
}

}  // namespace magloop
