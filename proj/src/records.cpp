#include "magloop/records.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "magloop/config.hpp"
#include "magloop/errors.hpp"

namespace magloop {

namespace {

json complex_array(const Eigen::VectorXcd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back({v(i).real(), v(i).imag()});
  return out;
}

Eigen::VectorXcd complex_from(const json& j) {
  Eigen::VectorXcd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = {j[i].at(0).get<double>(), j[i].at(1).get<double>()};
  return v;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

json loop_to_json(const DiscreteLoop& loop) {
  json nodes = json::array();
  for (const auto& n : loop.nodes) nodes.push_back({n.x(), n.y()});
  return {{"N", loop.N()}, {"T", loop.T}, {"winding", loop.winding}, {"nodes", nodes}};
}

DiscreteLoop loop_from_json(const json& j) {
  DiscreteLoop loop;
  loop.T = j.at("T").get<double>();
  loop.winding = j.at("winding").get<int>();
  for (const auto& n : j.at("nodes")) loop.nodes.emplace_back(n.at(0).get<double>(), n.at(1).get<double>());
  if (j.at("N").get<int>() != loop.N()) throw Error(ErrorKind::Config, "loop node count does not match N");
  return loop;
}

json index_to_json(const IndexReport& r) {
  json table = json::array();
  for (const auto& row : r.table)
    table.push_back({{"n", row.n}, {"m", row.m}, {"m0", row.m0}, {"mT", row.mT}, {"mT0", row.mT0},
                     {"m0_monodromy", row.m0_monodromy}});
  return {{"m", r.m},
          {"m0", r.m0},
          {"mT", r.mT},
          {"mT0", r.mT0},
          {"m0_monodromy", r.m0_monodromy},
          {"mhat", r.mhat},
          {"mhat_rotation", r.mhat_rotation},
          {"mhat_flagged", r.mhat_flagged},
          {"null_tolerance", r.null_tolerance},
          {"monodromy_eigenvalues", complex_array(r.monodromy_eigenvalues)},
          {"poincare_eigenvalues", complex_array(r.poincare_eigenvalues)},
          {"table", table}};
}

IndexReport index_from_json(const json& j) {
  IndexReport r;
  r.m = j.at("m").get<int>();
  r.m0 = j.at("m0").get<int>();
  r.mT = j.at("mT").get<int>();
  r.mT0 = j.at("mT0").get<int>();
  r.m0_monodromy = j.at("m0_monodromy").get<int>();
  r.mhat = j.at("mhat").get<double>();
  r.mhat_rotation = j.at("mhat_rotation").get<double>();
  r.mhat_flagged = j.at("mhat_flagged").get<bool>();
  r.null_tolerance = j.at("null_tolerance").get<double>();
  r.monodromy_eigenvalues = complex_from(j.at("monodromy_eigenvalues"));
  r.poincare_eigenvalues = complex_from(j.at("poincare_eigenvalues"));
  for (const auto& row : j.at("table"))
    r.table.push_back({row.at("n").get<int>(), row.at("m").get<int>(), row.at("m0").get<int>(),
                       row.at("mT").get<int>(), row.at("mT0").get<int>(), row.at("m0_monodromy").get<int>()});
  return r;
}

json orbit_to_json(const OrbitRecord& r) {
  json j = {{"type", "orbit"},
            {"system_hash", r.system_hash},
            {"system", r.system},
            {"k", r.k},
            {"winding", r.winding},
            {"loop", loop_to_json(r.loop)},
            {"action", r.action},
            {"el_residual", r.el_residual},
            {"speed_residual", r.speed_residual},
            {"penalty_active", r.penalty_active},
            {"sigma", r.sigma},
            {"origin", r.origin},
            {"x_star", r.x_star},
            {"p_y", r.p_y},
            {"seed", r.seed},
            {"checks",
             {{"report_invariants", r.checks.report_invariants},
              {"iteration_inequalities", r.checks.iteration_inequalities},
              {"doubled_inequalities", r.checks.doubled_inequalities},
              {"escape_bound", r.checks.escape_bound},
              {"failures", r.checks.failures}}}};
  j["index"] = r.index ? index_to_json(*r.index) : json(nullptr);
  return j;
}

OrbitRecord orbit_from_json(const json& j) {
  try {
    if (j.at("type").get<std::string>() != "orbit") throw Error(ErrorKind::Config, "not an orbit record");
    OrbitRecord r;
    r.system_hash = j.at("system_hash").get<std::string>();
    r.system = j.at("system").get<std::string>();
    r.k = j.at("k").get<double>();
    r.winding = j.at("winding").get<int>();
    r.loop = loop_from_json(j.at("loop"));
    r.action = j.at("action").get<double>();
    r.el_residual = j.at("el_residual").get<double>();
    r.speed_residual = j.at("speed_residual").get<double>();
    r.penalty_active = j.at("penalty_active").get<bool>();
    r.sigma = j.at("sigma").get<double>();
    r.origin = j.at("origin").get<std::string>();
    r.x_star = j.at("x_star").get<double>();
    r.p_y = j.at("p_y").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    const json& c = j.at("checks");
    r.checks.report_invariants = c.at("report_invariants").get<bool>();
    r.checks.iteration_inequalities = c.at("iteration_inequalities").get<bool>();
    r.checks.doubled_inequalities = c.at("doubled_inequalities").get<bool>();
    r.checks.escape_bound = c.at("escape_bound").get<bool>();
    r.checks.failures = c.at("failures").get<std::vector<std::string>>();
    if (!j.at("index").is_null()) r.index = index_from_json(j.at("index"));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("malformed orbit record: ") + e.what());
  }
}

std::vector<std::string> validate_record(const OrbitRecord& r) {
  std::vector<std::string> errs;
  try {
    r.loop.validate();
  } catch (const Error& e) {
    errs.push_back(e.what());
  }
  if (r.penalty_active) errs.push_back("accepted record with active penalty");
  if (r.loop.winding != r.winding) errs.push_back("loop winding differs from record winding");
  if (!(r.k > 0.0)) errs.push_back("energy must be positive");
  if (r.system_hash != hex64(fnv1a(r.system))) errs.push_back("system hash mismatch");
  if (r.index) {
    const IndexReport& ix = *r.index;
    if (ix.m < 0 || ix.m0 < 0 || ix.mT < 0 || ix.mT0 < 0) errs.push_back("negative index count");
    if (ix.mhat < 0.0) errs.push_back("negative mean index");
    if (ix.table.empty() || ix.table.front().m != ix.m) errs.push_back("index table inconsistent with n=1 entry");
  }
  return errs;
}

json bracket_to_json(const CriticalValueBracket& b) {
  json j = {{"lower", b.lower},
            {"upper", b.upper},
            {"status", to_string(b.status)},
            {"iterations", b.iterations},
            {"universal", b.universal},
            {"asymmetric", b.profile.asymmetric},
            {"closed_form", b.profile.closed_form},
            {"cell_edges", b.profile.cell_edges},
            {"u_prime", b.profile.u_prime}};
  if (b.witness) {
    j["witness"] = {{"action", b.witness->action},
                    {"description", b.witness->description},
                    {"loop", loop_to_json(b.witness->loop)}};
  } else {
    j["witness"] = nullptr;
  }
  return j;
}

void ResultsDB::append(const json& payload) const {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(ErrorKind::Config, "cannot open results file '" + path_ + "'");
  const json line = {{"payload", payload}, {"meta", {{"timestamp", utc_timestamp()}}}};
  out << line.dump() << '\n';
}

std::vector<json> ResultsDB::payloads() const {
  std::ifstream in(path_);
  if (!in) throw Error(ErrorKind::Config, "cannot open results file '" + path_ + "'");
  std::vector<json> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).at("payload"));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Config, path_ + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace magloop
