#include "magloop/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "magloop/dynamics.hpp"
#include "magloop/errors.hpp"
#include "magloop/index.hpp"
#include "magloop/mane.hpp"

namespace magloop {

namespace fs = std::filesystem;

namespace {

std::ostream& null_stream() {
  static std::ostringstream sink;
  sink.str("");
  return sink;
}

std::ostream& log_of(const RunOptions& opts) { return opts.log ? *opts.log : null_stream(); }

std::uint64_t effective_seed(const RunConfig& cfg, const RunOptions& opts) {
  if (opts.seed) return *opts.seed;
  const int s = cfg.get_int("seed", 1);
  if (s < 0) throw Error(ErrorKind::Config, "key 'seed': must be non-negative");
  return static_cast<std::uint64_t>(s);
}

int effective_threads(const RunConfig& cfg, const RunOptions& opts) {
  const int t = opts.threads ? *opts.threads : cfg.get_int("threads", 1);
  if (t < 1) throw Error(ErrorKind::Config, "threads must be at least 1");
  return t;
}

json base_payload(const std::string& type, const RunConfig& cfg, const RunOptions& opts) {
  return {{"type", type},
          {"version", kToolkitVersion},
          {"config_hash", hex64(cfg.hash())},
          {"seed", effective_seed(cfg, opts)}};
}

fs::path out_path(const RunOptions& opts, const std::string& name) {
  fs::create_directories(opts.out_dir);
  return fs::path(opts.out_dir) / name;
}

void persist(const RunOptions& opts, CommandResult& result, json payload) {
  ResultsDB(out_path(opts, "results.jsonl").string()).append(payload);
  result.payloads.push_back(std::move(payload));
}

std::ofstream open_csv(const RunOptions& opts, const std::string& name) {
  std::ofstream out(out_path(opts, name));
  if (!out) throw Error(ErrorKind::Config, "cannot write '" + name + "' in " + opts.out_dir);
  out << std::setprecision(17);
  return out;
}

std::string tag(double k, int w) {
  std::ostringstream os;
  os << "k" << k << "_w" << w;
  return os.str();
}

std::vector<int> windings(const RunConfig& cfg) {
  auto ws = cfg.get_ints("winding", {1});
  for (int w : ws)
    if (w == 0 || std::abs(w) > 16) throw Error(ErrorKind::Config, "key 'winding': must be nonzero with |w| <= 16");
  return ws;
}

std::vector<double> energies(const RunConfig& cfg) {
  if (!cfg.has("k")) throw Error(ErrorKind::Config, "missing required key 'k'");
  auto ks = cfg.get_doubles("k", {});
  for (double k : ks)
    if (!(k > 0.0)) throw Error(ErrorKind::Config, "key 'k': energies must be positive");
  return ks;
}

IndexOptions index_options(const RunConfig& cfg, const RunOptions& opts) {
  IndexOptions o;
  o.n_max = cfg.get_int("index.n_max", o.n_max);
  o.tol_null = cfg.get_positive("index.tol_null", o.tol_null);
  o.threads = effective_threads(cfg, opts);
  if (o.n_max < 1) throw Error(ErrorKind::Config, "key 'index.n_max': must be at least 1");
  return o;
}

void write_loop_csv(const RunOptions& opts, const std::string& name, const DiscreteLoop& loop) {
  auto out = open_csv(opts, name);
  out << "j,t,x,y\n";
  for (int j = 0; j < loop.N(); ++j)
    out << j << ',' << loop.T * j / loop.N() << ',' << loop.nodes[j].x() << ',' << loop.nodes[j].y() << '\n';
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
      return kExitConfig;
    case ErrorKind::NoOrbitFound:
      return kExitNoOrbit;
    default:
      return kExitNumerical;
  }
}

SolveOptions solve_options(const RunConfig& cfg, const RunOptions& opts) {
  SolveOptions o;
  o.N = cfg.get_int("N", o.N);
  if (o.N < 8 || o.N > 4096) throw Error(ErrorKind::Config, "key 'N': must lie in [8, 4096]");
  o.sigma_schedule = cfg.get_doubles("sigma", o.sigma_schedule);
  o.x_inits = cfg.get_doubles("find.x_inits", o.x_inits);
  o.scan_seeds = cfg.get_bool("find.scan_seeds", o.scan_seeds);
  o.action_cap = cfg.get_positive("find.action_cap", o.action_cap);
  o.action_offset = cfg.get_double("find.action_offset", o.action_offset);
  o.c_u_estimate = cfg.get_double("find.c_u", o.c_u_estimate);
  o.max_iterations = cfg.get_int("find.max_iterations", o.max_iterations);
  o.perturbation = cfg.get_double("find.perturbation", o.perturbation);
  o.g_tol = cfg.get_positive("find.g_tol", o.g_tol);
  o.newton_tol = cfg.get_positive("find.newton_tol", o.newton_tol);
  o.trust_radius = cfg.get_positive("find.trust_radius", o.trust_radius);
  o.escape_radius = cfg.get_positive("find.escape_radius", o.escape_radius);
  o.penalty_power = cfg.get_int("find.penalty_power", o.penalty_power);
  if (o.penalty_power < 2) throw Error(ErrorKind::Config, "key 'find.penalty_power': must be at least 2");
  if (o.max_iterations < 1) throw Error(ErrorKind::Config, "key 'find.max_iterations': must be positive");
  for (double s : o.sigma_schedule)
    if (!(s > 1.0)) throw Error(ErrorKind::Config, "key 'sigma': levels must exceed 1");
  o.seed = effective_seed(cfg, opts);
  o.threads = effective_threads(cfg, opts);
  o.scan = scan_options(cfg, opts);
  return o;
}

ScanOptions scan_options(const RunConfig& cfg, const RunOptions& opts) {
  ScanOptions o;
  o.x_min = cfg.get_double("scan.x_min", o.x_min);
  o.x_max = cfg.get_double("scan.x_max", o.x_max);
  o.n_x = cfg.get_int("scan.n_x", o.n_x);
  o.n_vx = cfg.get_int("scan.n_vx", o.n_vx);
  o.vx_fraction = cfg.get_positive("scan.vx_fraction", o.vx_fraction);
  o.fp_tol = cfg.get_positive("scan.fp_tol", o.fp_tol);
  o.refine_gate = cfg.get_positive("scan.refine_gate", o.refine_gate);
  o.time_cap = cfg.get_positive("scan.time_cap", o.time_cap);
  o.rtol = cfg.get_positive("scan.rtol", o.rtol);
  o.window_margin = cfg.get_double("scan.window_margin", o.window_margin);
  o.threads = effective_threads(cfg, opts);
  if (!(o.x_max > o.x_min)) throw Error(ErrorKind::Config, "key 'scan.x_max': must exceed scan.x_min");
  if (o.n_x < 2 || o.n_vx < 1) throw Error(ErrorKind::Config, "key 'scan.n_x': grid too small");
  if (o.vx_fraction >= 1.0) throw Error(ErrorKind::Config, "key 'scan.vx_fraction': must be below 1");
  return o;
}

OrbitRecord make_orbit_record(const MagneticSystem& system, double k, const AcceptedOrbit& orbit,
                              std::uint64_t seed, bool with_index, const IndexOptions& index_opts) {
  OrbitRecord r;
  r.system = system.description();
  r.system_hash = hex64(fnv1a(r.system));
  r.k = k;
  r.winding = orbit.loop.winding;
  r.loop = orbit.loop;
  r.action = orbit.action;
  r.el_residual = orbit.crit.el_residual;
  r.speed_residual = orbit.crit.speed_residual;
  r.penalty_active = false;
  r.sigma = orbit.sigma;
  r.origin = orbit.origin;
  const OrbitSummary s = summarize_orbit(system, orbit.loop);
  r.x_star = s.x_mean;
  r.p_y = s.p_y;
  r.seed = seed;
  if (with_index) {
    r.index = index_report(system, orbit.loop, k, index_opts);
    const auto inv = check_report_invariants(*r.index);
    r.checks.report_invariants = inv.empty();
    for (const auto& f : inv) r.checks.failures.push_back(f);
    const auto it = check_iteration_inequalities(*r.index);
    r.checks.iteration_inequalities = it.pass;
    if (!it.pass) r.checks.failures.push_back("iteration inequalities: " + it.detail);
    const auto dbl = check_doubled_inequalities(*r.index);
    r.checks.doubled_inequalities = dbl.pass;
    if (!dbl.pass) r.checks.failures.push_back("doubled inequalities: " + dbl.detail);
    r.checks.escape_bound = escape_index_bound(*r.index);
    if (!r.checks.escape_bound) r.checks.failures.push_back("escape index bound");
  }
  return r;
}

CommandResult cmd_simulate(const RunConfig& cfg, const RunOptions& opts) {
  const MagneticSystem system = cfg.system();
  std::ostream& log = log_of(opts);
  State s0;
  s0.q = {cfg.get_double("simulate.x", 0.0), cfg.get_double("simulate.y", 0.0)};
  const double vx = cfg.get_double("simulate.vx", 0.0);
  if (cfg.has("simulate.vy")) {
    s0.v = {vx, cfg.get_double("simulate.vy", 0.0)};
  } else {
    const double k = energies(cfg).front();
    auto s = section_state(system, k, 1, s0.q.x(), vx, s0.q.y());
    if (!s) throw Error(ErrorKind::Config, "key 'simulate.vx': exceeds the speed allowed by energy k");
    s0 = *s;
  }
  const double duration = cfg.get_positive("simulate.duration", 20.0);
  const double tol = cfg.get_positive("simulate.tol", 1e-10);
  const double dt = cfg.get_positive("simulate.dt", 0.01);
  const Trajectory traj = flow(system, s0, duration, tol, dt);

  auto csv = open_csv(opts, "trajectory.csv");
  csv << "t,x,y,vx,vy,energy,p_y\n";
  for (const auto& smp : traj.samples) {
    const PhasePoint p = legendre(system, smp.state.q, smp.state.v);
    csv << smp.t << ',' << smp.state.q.x() << ',' << smp.state.q.y() << ',' << smp.state.v.x() << ','
        << smp.state.v.y() << ',' << energy(system, smp.state) << ',' << p.p.y() << '\n';
  }

  CommandResult result;
  json payload = base_payload("trajectory", cfg, opts);
  payload["system"] = system.description();
  payload["initial"] = {s0.q.x(), s0.q.y(), s0.v.x(), s0.v.y()};
  payload["energy"] = energy(system, s0);
  payload["duration"] = duration;
  payload["tol"] = tol;
  payload["samples"] = traj.samples.size();
  payload["energy_drift"] = traj.energy_drift;
  const auto& last = traj.samples.back().state;
  payload["final"] = {last.q.x(), last.q.y(), last.v.x(), last.v.y()};
  persist(opts, result, payload);
  log << "simulated " << traj.samples.size() << " samples over t in [0, " << duration
      << "], energy drift " << traj.energy_drift << "\n";
  return result;
}

CommandResult cmd_find(const RunConfig& cfg, const RunOptions& opts) {
  const MagneticSystem system = cfg.system();
  const SolveOptions solve = solve_options(cfg, opts);
  const IndexOptions iopts = index_options(cfg, opts);
  const bool with_index = cfg.get_bool("find.index", true);
  std::ostream& log = log_of(opts);

  CommandResult result;
  bool missing = false;
  log << std::left << std::setw(8) << "k" << std::setw(8) << "winding" << std::setw(14) << "action"
      << std::setw(8) << "T" << std::setw(12) << "x*" << std::setw(12) << "p_y" << std::setw(6) << "m"
      << std::setw(6) << "m0" << std::setw(8) << "mhat" << "checks\n";
  for (double k : energies(cfg)) {
    for (int w : windings(cfg)) {
      const FindResult found = find_orbit(system, k, w, solve);
      if (!found.found()) {
        missing = true;
        json payload = base_payload("no_orbit", cfg, opts);
        payload["system"] = system.description();
        payload["k"] = k;
        payload["winding"] = w;
        payload["diagnostics"] = found.summary();
        persist(opts, result, payload);
        log << std::setw(8) << k << std::setw(8) << w << "no orbit found\n" << found.summary();
        continue;
      }
      const OrbitRecord rec = make_orbit_record(system, k, *found.best, solve.seed, with_index, iopts);
      json payload = base_payload("orbit", cfg, opts);
      payload["record"] = orbit_to_json(rec);
      persist(opts, result, payload);
      write_loop_csv(opts, "orbit_" + tag(k, w) + ".csv", rec.loop);
      log << std::setw(8) << k << std::setw(8) << w << std::setw(14) << rec.action << std::setw(8)
          << std::setprecision(4) << rec.loop.T << std::setw(12) << rec.x_star << std::setw(12) << rec.p_y;
      if (rec.index)
        log << std::setw(6) << rec.index->m << std::setw(6) << rec.index->m0 << std::setw(8) << rec.index->mhat;
      else
        log << std::setw(20) << "-";
      log << (rec.checks.all_pass() ? "pass" : "FAIL") << std::setprecision(6) << "\n";
      for (const auto& f : rec.checks.failures) log << "  " << f << "\n";
    }
  }
  if (missing) result.exit_code = kExitNoOrbit;
  return result;
}

CommandResult cmd_index(const RunConfig& cfg, const RunOptions& opts) {
  if (!cfg.has("index.input")) throw Error(ErrorKind::Config, "missing required key 'index.input'");
  const MagneticSystem system = cfg.system();
  const IndexOptions iopts = index_options(cfg, opts);
  const std::string hash = hex64(fnv1a(system.description()));
  std::ostream& log = log_of(opts);
  CommandResult result;
  for (const json& p : ResultsDB(cfg.get_string("index.input", "")).payloads()) {
    if (p.value("type", "") != "orbit") continue;
    const OrbitRecord in = orbit_from_json(p.at("record"));
    if (in.system_hash != hash) continue;
    AcceptedOrbit orbit{in.loop, in.action, {in.el_residual, in.speed_residual, 0.0}, in.sigma, in.origin};
    const OrbitRecord rec = make_orbit_record(system, in.k, orbit, in.seed, true, iopts);
    json payload = base_payload("index", cfg, opts);
    payload["record"] = orbit_to_json(rec);
    persist(opts, result, payload);
    auto csv = open_csv(opts, "index_" + tag(rec.k, rec.winding) + ".csv");
    csv << "n,m,m0,mT,mT0,m0_monodromy\n";
    for (const auto& row : rec.index->table)
      csv << row.n << ',' << row.m << ',' << row.m0 << ',' << row.mT << ',' << row.mT0 << ',' << row.m0_monodromy
          << '\n';
    log << "k=" << rec.k << " winding=" << rec.winding << " m=" << rec.index->m << " m0=" << rec.index->m0
        << " mT=" << rec.index->mT << " mT0=" << rec.index->mT0 << " mhat=" << rec.index->mhat << " checks "
        << (rec.checks.all_pass() ? "pass" : "FAIL") << "\n";
  }
  if (result.payloads.empty()) throw Error(ErrorKind::Config, "no orbit records for this system in index.input");
  return result;
}

CommandResult cmd_mane(const RunConfig& cfg, const RunOptions& opts) {
  const MagneticSystem system = cfg.system();
  const double tol = cfg.get_positive("mane.tol", 1e-2);
  BracketOptions bo;
  bo.upper.x_lo = cfg.get_double("mane.x_lo", bo.upper.x_lo);
  bo.upper.x_hi = cfg.get_double("mane.x_hi", bo.upper.x_hi);
  bo.upper.grid = cfg.get_int("mane.grid", bo.upper.grid);
  bo.upper.refine = cfg.get_int("mane.refine", bo.upper.refine);
  bo.upper.u_basis_size = cfg.get_int("mane.u_basis_size", bo.upper.u_basis_size);
  bo.max_iterations = cfg.get_int("mane.max_iterations", bo.max_iterations);
  if (!(bo.upper.x_hi > bo.upper.x_lo)) throw Error(ErrorKind::Config, "key 'mane.x_hi': must exceed mane.x_lo");
  if (bo.upper.grid < 2 || bo.upper.refine < 1 || bo.upper.u_basis_size < 1 || bo.max_iterations < 1)
    throw Error(ErrorKind::Config, "mane grid, refine, basis and iteration counts must be positive");
  const bool universal = cfg.get_bool("mane.universal", true);
  std::ostream& log = log_of(opts);

  CommandResult result;
  auto emit = [&](const CriticalValueBracket& b, const std::string& kind) {
    json payload = base_payload("bracket", cfg, opts);
    payload["system"] = system.description();
    payload["kind"] = kind;
    payload["tol"] = tol;
    payload["grid"] = {{"x_lo", bo.upper.x_lo},
                       {"x_hi", bo.upper.x_hi},
                       {"points", bo.upper.grid},
                       {"refine", bo.upper.refine},
                       {"u_basis_size", bo.upper.u_basis_size},
                       {"max_iterations", bo.max_iterations}};
    payload["bracket"] = bracket_to_json(b);
    persist(opts, result, payload);
    auto csv = open_csv(opts, "profile_" + kind + ".csv");
    csv << "x_left,x_right,u_prime\n";
    for (std::size_t i = 0; i < b.profile.u_prime.size(); ++i)
      csv << b.profile.cell_edges[i] << ',' << b.profile.cell_edges[i + 1] << ',' << b.profile.u_prime[i] << '\n';
    log << kind << " in [" << std::setprecision(10) << b.lower << ", " << b.upper << "] (" << to_string(b.status)
        << ", " << b.iterations << " bisection steps)" << std::setprecision(6);
    if (b.profile.asymmetric) log << " [heuristic: system depends on y]";
    log << "\n";
    if (b.witness) log << "  witness: " << b.witness->description << "\n";
  };
  emit(estimate_c(system, tol, bo), "c");
  if (universal) emit(estimate_c_u(system, tol, bo), "c_u");
  return result;
}

CommandResult cmd_scan(const RunConfig& cfg, const RunOptions& opts) {
  const MagneticSystem system = cfg.system();
  const ScanOptions so = scan_options(cfg, opts);
  std::ostream& log = log_of(opts);
  CommandResult result;
  for (double k : energies(cfg)) {
    for (int w : windings(cfg)) {
      const ScanResult scan = poincare_scan(system, k, w, so);
      auto csv = open_csv(opts, "scan_" + tag(k, w) + ".csv");
      csv << "seed,x,vx,residual,class\n";
      for (std::size_t i = 0; i < scan.seeds.size(); ++i) {
        const auto& s = scan.seeds[i];
        csv << i << ',' << s.x << ',' << s.vx << ',' << s.residual << ',' << to_string(s.classification) << '\n';
      }
      double min_residual = std::numeric_limits<double>::infinity();
      for (const auto& s : scan.seeds) min_residual = std::min(min_residual, s.residual);
      json fps = json::array();
      for (const auto& f : scan.fixed_points)
        fps.push_back({{"x", f.x}, {"vx", f.vx}, {"vy", f.vy}, {"residual", f.residual},
                       {"return_time", f.return_time}});
      json payload = base_payload("scan", cfg, opts);
      payload["system"] = system.description();
      payload["k"] = k;
      payload["winding"] = w;
      payload["seeds"] = scan.seeds.size();
      payload["no_return"] = scan.no_return;
      payload["min_residual"] = std::isfinite(min_residual) ? json(min_residual) : json(nullptr);
      payload["fixed_points"] = fps;
      payload["options"] = {{"x_min", so.x_min}, {"x_max", so.x_max}, {"n_x", so.n_x},   {"n_vx", so.n_vx},
                            {"fp_tol", so.fp_tol}, {"rtol", so.rtol},   {"time_cap", so.time_cap}};
      persist(opts, result, payload);
      log << "k=" << k << " winding=" << w << ": " << scan.seeds.size() << " seeds, " << scan.no_return
          << " without return, " << scan.fixed_points.size() << " fixed points\n";
      for (const auto& f : scan.fixed_points)
        log << "  x=" << f.x << " vx=" << f.vx << " residual=" << f.residual << "\n";
    }
  }
  return result;
}

CommandResult cmd_report(const RunConfig& cfg, const RunOptions& opts) {
  if (!cfg.has("report.input")) throw Error(ErrorKind::Config, "missing required key 'report.input'");
  const auto payloads = ResultsDB(cfg.get_string("report.input", "")).payloads();
  std::ostream& log = log_of(opts);
  CommandResult result;
  auto csv = open_csv(opts, "report_orbits.csv");
  csv << "type,system,k,winding,N,T,action,x_star,p_y,el_residual,speed_residual,m,m0,mT,mT0,mhat,checks\n";
  int invalid = 0;
  int orbits = 0;
  for (const json& p : payloads) {
    const std::string type = p.value("type", "");
    if (type == "orbit" || type == "index") {
      const OrbitRecord r = orbit_from_json(p.at("record"));
      const auto errs = validate_record(r);
      ++orbits;
      if (!errs.empty()) {
        ++invalid;
        for (const auto& e : errs) log << "invalid " << type << " record: " << e << "\n";
      }
      csv << type << ',' << r.system << ',' << r.k << ',' << r.winding << ',' << r.loop.N() << ',' << r.loop.T << ','
          << r.action << ',' << r.x_star << ',' << r.p_y << ',' << r.el_residual << ',' << r.speed_residual << ',';
      if (r.index)
        csv << r.index->m << ',' << r.index->m0 << ',' << r.index->mT << ',' << r.index->mT0 << ',' << r.index->mhat;
      else
        csv << ",,,,";
      csv << ',' << (r.checks.all_pass() ? "pass" : "fail") << '\n';
    } else if (type == "bracket") {
      log << p.value("kind", "?") << " for " << p.value("system", "?") << ": ["
          << p.at("bracket").at("lower").get<double>() << ", " << p.at("bracket").at("upper").get<double>() << "]\n";
    } else if (type == "scan") {
      log << "scan " << p.value("system", "?") << " k=" << p.at("k").get<double>() << ": "
          << p.at("fixed_points").size() << " fixed points\n";
    }
  }
  log << orbits << " orbit records, " << invalid << " invalid\n";
  json payload = base_payload("report", cfg, opts);
  payload["records"] = payloads.size();
  payload["orbit_records"] = orbits;
  payload["invalid"] = invalid;
  result.payloads.push_back(payload);
  if (invalid > 0) result.exit_code = kExitConfig;
  return result;
}

CommandResult run_command(const std::string& name, const RunConfig& cfg, const RunOptions& opts) {
  try {
    if (name == "simulate") return cmd_simulate(cfg, opts);
    if (name == "find") return cmd_find(cfg, opts);
    if (name == "index") return cmd_index(cfg, opts);
    if (name == "mane") return cmd_mane(cfg, opts);
    if (name == "scan") return cmd_scan(cfg, opts);
    if (name == "report") return cmd_report(cfg, opts);
    throw Error(ErrorKind::Config, "unknown command '" + name + "'");
  } catch (const Error& e) {
    if (opts.log) *opts.log << "error: " << e.what() << "\n";
    CommandResult r;
    r.exit_code = exit_code_for(e.kind());
    return r;
  }
}

}  // namespace magloop
