// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "magloop/commands.hpp"
#include "magloop/dynamics.hpp"
#include "magloop/errors.hpp"
#include "magloop/index.hpp"
#include "magloop/mane.hpp"
#include "magloop/solver.hpp"
#include "support.hpp"

using namespace magloop;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  json payload;  // data compared by the determinism criterion
};

class Clock {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path out_root() { return fs::temp_directory_path() / "magloop_acceptance"; }

RunOptions run_opts(const std::string& name, int round) {
  RunOptions ro;
  ro.out_dir = (out_root() / ("round" + std::to_string(round)) / name).string();
  fs::remove_all(ro.out_dir);
  ro.seed = 20240611;
  ro.threads = 4;
  return ro;
}

void fail(Outcome& o, const std::string& why) {
  o.pass = false;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += why;
}

Outcome criterion1(int round) {
  Outcome o;
  Clock clock;
  const auto cfg = RunConfig::parse("schema = 1\npreset = appendix-cylinder\nmane.tol = 0.01\nmane.universal = false\n");
  const auto r = run_command("mane", cfg, run_opts("c1", round));
  if (r.exit_code != kExitOk || r.payloads.empty()) {
    fail(o, "cmd_mane exit code " + std::to_string(r.exit_code));
    return o;
  }
  const double lo = r.payloads[0]["bracket"]["lower"], hi = r.payloads[0]["bracket"]["upper"];
  std::ostringstream os;
  os << "bracket [" << lo << ", " << hi << "] in " << clock.seconds() << " s";
  o.detail = os.str();
  if (!(lo <= 0.5 && 0.5 <= hi)) fail(o, "0.5 not contained");
  if (hi - lo > 0.02) fail(o, "width above 0.02");
  if (clock.seconds() > 120) fail(o, "runtime above 2 min");
  o.payload = r.payloads;
  return o;
}

Outcome criterion2(int round) {
  Outcome o;
  Clock clock;
  const auto cfg = RunConfig::parse(
      "schema = 1\npreset = appendix-cylinder\nk = 0.6, 1.0, 2.0\nwinding = 1\nscan.x_min = -6\nscan.x_max = 3\n"
      "scan.n_x = 500\nscan.n_vx = 21\nscan.fp_tol = 1e-6\n");
  const auto r = run_command("scan", cfg, run_opts("c2", round));
  if (r.exit_code != kExitOk || r.payloads.size() != 3) {
    fail(o, "cmd_scan exit code " + std::to_string(r.exit_code));
    return o;
  }
  std::ostringstream os;
  for (const auto& p : r.payloads) {
    const int seeds = p["seeds"], fps = static_cast<int>(p["fixed_points"].size());
    os << "k=" << p["k"].get<double>() << ": " << seeds << " seeds, " << fps << " fixed points; ";
    if (seeds < 10000) fail(o, "fewer than 1e4 seeds");
    if (fps != 0) fail(o, "fixed point found");
  }
  // Convexity along sampled trajectories with k > 1/2.
  const auto sys = appendix_cylinder();
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> uk(0.51, 3.0), ux(-6, 3), ua(0, 2 * M_PI);
  int events = 0, bad = 0;
  const int trajectories = 120;
  for (int t = 0; t < trajectories; ++t) {
    const double k = uk(rng), x = ux(rng), a = ua(rng);
    const double s = std::sqrt(2 * k);
    const State s0{{x, 0.0}, {s * std::cos(a), s * std::sin(a) / (1 + std::exp(x))}};
    for (const auto& ev : vx_zero_events(sys, s0, 40.0, 1e-11)) {
      ++events;
      if (!(ev.xddot > 0)) ++bad;
    }
  }
  os << trajectories << " trajectories, " << events << " vx zeros, " << bad << " with x'' <= 0; " << clock.seconds()
     << " s";
  o.detail = os.str();
  if (bad) fail(o, "non-convex vx zero");
  if (events == 0) fail(o, "no vx zeros sampled");
  if (clock.seconds() > 600) fail(o, "runtime above 10 min");
  o.payload = {{"scan", r.payloads}, {"events", events}, {"bad", bad}};
  return o;
}

Outcome criterion3(int) {
  Outcome o;
  const auto sys = appendix_cylinder();
  double worst = 0;
  json vals = json::array();
  for (double r : {-5.0, 0.0, 1.0})
    for (double k : {0.45, 1.0}) {
      const double s = action(sys, DiscreteLoop::circle(r, -1, 512, 1.0), k);
      const double expect = 0.5 * std::pow(1 + std::exp(r), 2) - std::exp(r) - 1 + k;
      worst = std::max(worst, std::abs(s - expect));
      vals.push_back(s);
    }
  std::ostringstream os;
  os << "max |S - formula| = " << worst << " over 6 cases";
  o.detail = os.str();
  if (worst > 1e-6) fail(o, "deviation above 1e-6");
  o.payload = vals;
  return o;
}

Outcome criterion4(int) {
  Outcome o;
  Clock clock;
  std::mt19937_64 rng(20240611);
  double worst_g = 0, worst_h = 0;
  int loops = 0;
  for (const char* name : {"appendix-cylinder", "flat-cylinder", "bump-cylinder"}) {
    const auto sys = make_preset(name);
    for (int t = 0; t < 100; ++t) {
      const int w = (t % 3) - 1 == 0 ? 2 : (t % 3) - 1;
      const auto loop = testkit::random_loop(rng, 16, w);
      const double k = 0.3 + 0.01 * t;
      auto f = [&](const Eigen::VectorXd& z) { return action(sys, DiscreteLoop::unpack(z, w), k); };
      auto g = [&](const Eigen::VectorXd& z) { return gradient_vector(sys, DiscreteLoop::unpack(z, w), k); };
      const Eigen::VectorXd z = loop.packed();
      worst_g = std::max(worst_g, testkit::rel_err(gradient_vector(sys, loop, k), testkit::fd_gradient(f, z, 1e-6)));
      worst_h = std::max(worst_h, testkit::rel_err(hessian(sys, loop, k), testkit::fd_jacobian(g, z, 1e-6)));
      ++loops;
    }
  }
  std::ostringstream os;
  os << loops << " loops: gradient rel err " << worst_g << ", Hessian rel err " << worst_h << "; " << clock.seconds()
     << " s";
  o.detail = os.str();
  if (worst_g >= 1e-6) fail(o, "gradient error");
  if (worst_h >= 1e-5) fail(o, "Hessian error");
  if (clock.seconds() > 300) fail(o, "runtime above 5 min");
  o.payload = {{"loops", loops}};
  return o;
}

Outcome criterion5(int round) {
  Outcome o;
  const auto cfg = RunConfig::parse("schema = 1\npreset = bump-cylinder\nk = 1\nwinding = -1\nN = 32\n");
  const auto r = run_command("find", cfg, run_opts("c5", round));
  if (r.exit_code != kExitOk || r.payloads.empty()) {
    fail(o, "cmd_find exit code " + std::to_string(r.exit_code));
    return o;
  }
  const auto rec = orbit_from_json(r.payloads[0]["record"]);
  // Reduced oracle: circles x = c with a'(c) = 0; at c = 0, p_y = v_y + a0 = -sqrt(2k) + a0.
  const double x_oracle = 0.0, py_oracle = -std::sqrt(2.0) + 0.5;
  const double speed_rel = rec.speed_residual / (2 * rec.k * rec.loop.T * rec.loop.T);
  std::ostringstream os;
  os << "x*=" << rec.x_star << " p_y=" << rec.p_y << " EL=" << rec.el_residual << " speed=" << speed_rel
     << " checks=" << (rec.checks.all_pass() ? "pass" : "fail");
  o.detail = os.str();
  if (rec.el_residual >= 1e-6) fail(o, "EL residual");
  if (speed_rel >= 1e-6) fail(o, "energy uniformity");
  if (std::abs(rec.x_star - x_oracle) >= 1e-6) fail(o, "x* off oracle");
  if (std::abs(rec.p_y - py_oracle) >= 1e-6) fail(o, "p_y off oracle");
  if (!rec.checks.all_pass()) fail(o, "record checks");
  o.payload = r.payloads;
  return o;
}

Outcome criterion6(int) {
  Outcome o;
  Clock clock;
  struct Case {
    MagneticSystem sys;
    double k;
    int w;
    bool scan;
    std::string name;
  };
  std::vector<Case> cases;
  for (int w : {1, 2, 3}) cases.push_back({flat_cylinder(), 0.5, w, false, "flat w=" + std::to_string(w)});
  cases.push_back({bump_cylinder(), 1.0, -1, false, "bump w=-1"});
  cases.push_back({bump_cylinder(), 1.0, 1, true, "bump w=+1"});
  cases.push_back({bump_cylinder(2.0, 1.0), 1.0, 1, true, "bump(a0=2) w=+1"});
  int rows = 0, violations = 0;
  std::ostringstream os;
  for (const auto& c : cases) {
    SolveOptions so;
    so.N = 32;
    so.threads = 4;
    so.scan_seeds = c.scan;
    so.scan.x_min = -3;
    so.scan.x_max = 3;
    so.scan.n_x = 121;
    so.scan.n_vx = 5;
    const auto found = find_orbit(c.sys, c.k, c.w, so);
    if (!found.found()) {
      fail(o, c.name + ": no orbit");
      continue;
    }
    for (const auto& orbit : found.orbits) {
      IndexOptions io;
      io.n_max = 20;
      io.threads = 4;
      IndexReport rep;
      try {
        rep = index_report(c.sys, orbit.loop, c.k, io);
      } catch (const Error& e) {
        fail(o, c.name + ": " + e.what());
        continue;
      }
      for (const auto& row : rep.table) {
        ++rows;
        const bool ok = row.m - row.mT >= 0 && row.m - row.mT <= 1 && row.mT0 - 1 <= row.m0 && row.m0 <= row.mT0 &&
                        row.mT0 <= 4 && row.mT0 == row.m0_monodromy;
        if (!ok) {
          ++violations;
          std::ostringstream v;
          v << c.name << " n=" << row.n << " m=" << row.m << " mT=" << row.mT << " m0=" << row.m0 << " mT0=" << row.mT0
            << " dimker=" << row.m0_monodromy;
          fail(o, v.str());
        }
      }
      const auto ineq = check_iteration_inequalities(rep);
      violations += static_cast<int>(ineq.violations.size());
      if (!ineq.pass) fail(o, c.name + ": " + ineq.detail);
      os << c.name << " x*=" << summarize_orbit(c.sys, orbit.loop).x_mean << " mhat=" << rep.mhat << "; ";
    }
  }
  os << rows << " iterate rows, " << violations << " violations; " << clock.seconds() << " s";
  o.detail = os.str() + (o.detail.empty() ? "" : " | " + o.detail);
  if (rows == 0) fail(o, "empty regression set");
  if (clock.seconds() > 600) fail(o, "runtime above 10 min");
  return o;
}

Outcome criterion7(int) {
  Outcome o;
  std::ostringstream os;
  int checked = 0;
  for (double k : {0.5, 1.0, 2.0})
    for (int w : {1, 2, 3}) {
      const auto sys = flat_cylinder();
      SolveOptions so;
      const auto found = find_orbit(sys, k, w, so);
      if (!found.found()) {
        fail(o, "no flat geodesic");
        continue;
      }
      const double l = loop_length(sys, found.best->loop);
      const double T_true = l / std::sqrt(2 * k);
      const auto b = period_bounds(k, 2 * found.best->action, l, 0.0, 0.0, 0.0);
      ++checked;
      if (!(b.lower() <= T_true && T_true <= b.upper())) {
        std::ostringstream v;
        v << "k=" << k << " w=" << w << " T=" << T_true << " outside [" << b.lower() << ", " << b.upper() << "]";
        fail(o, v.str());
      }
      if (std::abs(found.best->loop.T - T_true) > 1e-8) fail(o, "found period differs from l/sqrt(2k)");
    }
  os << checked << " (k, winding) pairs";
  o.detail = os.str() + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome criterion8(int) {
  Outcome o;
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<long> num(0, 20), den(1, 12);
  std::uniform_int_distribution<int> uq(4, 12), ulen(1, 5);
  int mismatches = 0;
  for (int t = 0; t < 20; ++t) {
    const int q = uq(rng), dimM = 2;
    std::vector<double> mh;
    long expect = -1;
    for (int i = ulen(rng); i > 0; --i) {
      const long a = num(rng), b = den(rng);
      mh.push_back(static_cast<double>(a) / b);
      if (a == 0) continue;
      long n = 1;
      while (n * a <= static_cast<long>(q + dimM) * b) ++n;
      expect = std::max(expect, n);
    }
    const auto got = vanishing_threshold(q, dimM, mh);
    if ((expect < 0) != !got.has_value() || (got && *got != expect)) ++mismatches;
  }
  o.detail = "20 cases, " + std::to_string(mismatches) + " mismatches";
  if (mismatches) fail(o, "threshold mismatch");
  return o;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    std::function<Outcome(int)> run;
  };
  const std::vector<Entry> criteria = {{1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
                                       {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8}};
  bool all = true;
  std::vector<json> first_round(6);
  for (const auto& c : criteria) {
    Outcome r;
    try {
      r = c.run(1);
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    if (c.id <= 5) first_round[c.id] = r.payload;
    all = all && r.pass;
    std::cout << "criterion " << c.id << ": " << (r.pass ? "PASS" : "FAIL") << "  " << r.detail << std::endl;
  }

  // Criterion 9: rerun 1-5 and compare the serialized payloads byte for byte.
  Outcome det;
  for (int id = 1; id <= 5; ++id) {
    json again;
    try {
      again = criteria[id - 1].run(2).payload;
    } catch (const std::exception& e) {
      fail(det, std::string("exception: ") + e.what());
      continue;
    }
    const std::string a = first_round[id].dump(), b = again.dump();
    if (a != b) fail(det, "criterion " + std::to_string(id) + " payload differs");
    if (a == "null") fail(det, "criterion " + std::to_string(id) + " produced no payload");
  }
  if (det.pass) det.detail = "payloads of criteria 1-5 byte-identical across two runs";
  all = all && det.pass;
  std::cout << "criterion 9: " << (det.pass ? "PASS" : "FAIL") << "  " << det.detail << std::endl;
  return all ? 0 : 1;
}
