#include "magloop/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "magloop/errors.hpp"

namespace magloop {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_double(const std::string& s, double* out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  *out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(*out);
}

bool parse_int(const std::string& s, long long* out) {
  const std::string t = trim(s);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), *out);
  return r.ec == std::errc() && r.ptr == t.data() + t.size();
}

}  // namespace

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = {
      "schema",
      // system
      "preset", "g11", "g12", "g22", "theta1", "theta2", "bump.amplitude", "bump.radius",
      // shared
      "k", "winding", "N", "seed", "threads",
      // find
      "sigma", "find.x_inits", "find.scan_seeds", "find.action_cap", "find.action_offset", "find.c_u",
      "find.max_iterations", "find.perturbation", "find.g_tol", "find.newton_tol", "find.trust_radius",
      "find.escape_radius", "find.penalty_power", "find.index",
      // scan
      "scan.x_min", "scan.x_max", "scan.n_x", "scan.n_vx", "scan.vx_fraction", "scan.fp_tol", "scan.refine_gate",
      "scan.time_cap", "scan.rtol", "scan.window_margin",
      // index
      "index.n_max", "index.tol_null", "index.input",
      // mane
      "mane.tol", "mane.x_lo", "mane.x_hi", "mane.grid", "mane.refine", "mane.u_basis_size", "mane.universal",
      "mane.max_iterations",
      // simulate
      "simulate.x", "simulate.y", "simulate.vx", "simulate.vy", "simulate.duration", "simulate.tol",
      "simulate.dt",
      // report
      "report.input"};
  return keys;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  cfg.origin_ = origin;
  std::stringstream ss(text);
  std::string raw;
  int line_no = 0;
  const auto& known = known_keys();
  while (std::getline(ss, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw Error(ErrorKind::Config, where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw Error(ErrorKind::Config, where + ": unknown key '" + key + "'");
    if (cfg.values_.count(key)) throw Error(ErrorKind::Config, where + ": duplicate key '" + key + "'");
    if (value.empty()) throw Error(ErrorKind::Config, where + ": empty value for '" + key + "'");
    cfg.values_[key] = Entry{value, line_no};
  }
  if (!cfg.has("schema")) throw Error(ErrorKind::Config, origin + ": missing 'schema'");
  if (cfg.get_int("schema", 0) != kConfigSchema)
    cfg.fail("schema", "unsupported schema version (expected " + std::to_string(kConfigSchema) + ")");
  const bool expr = cfg.has("g11") || cfg.has("g12") || cfg.has("g22") || cfg.has("theta1") || cfg.has("theta2");
  if (cfg.has("preset") && expr) cfg.fail("preset", "give either a preset or metric expressions, not both");
  if (!cfg.has("preset") && !expr) throw Error(ErrorKind::Config, origin + ": no system given (preset or g11..)");
  if (expr)
    for (const char* k : {"g11", "g12", "g22", "theta1", "theta2"})
      if (!cfg.has(k)) throw Error(ErrorKind::Config, origin + ": expression system needs '" + std::string(k) + "'");
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void RunConfig::fail(const std::string& key, const std::string& msg) const {
  const auto it = values_.find(key);
  const std::string where = it == values_.end() ? origin_ : origin_ + ":" + std::to_string(it->second.line);
  throw Error(ErrorKind::Config, where + ": key '" + key + "': " + msg);
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second.value;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double v;
  if (!parse_double(it->second.value, &v)) fail(key, "expected a real number");
  return v;
}

double RunConfig::get_positive(const std::string& key, double fallback) const {
  const double v = get_double(key, fallback);
  if (!(v > 0.0)) fail(key, "must be positive");
  return v;
}

int RunConfig::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  long long v;
  if (!parse_int(it->second.value, &v) || v < INT32_MIN || v > INT32_MAX) fail(key, "expected an integer");
  return static_cast<int>(v);
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second.value;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(key, "expected true or false");
}

std::vector<double> RunConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(it->second.value)) {
    double v;
    if (!parse_double(item, &v)) fail(key, "expected a comma-separated list of reals");
    out.push_back(v);
  }
  if (out.empty()) fail(key, "empty list");
  return out;
}

std::vector<int> RunConfig::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int> out;
  for (const auto& item : split_list(it->second.value)) {
    long long v;
    if (!parse_int(item, &v) || v < INT32_MIN || v > INT32_MAX) fail(key, "expected a comma-separated list of integers");
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) fail(key, "empty list");
  return out;
}

MagneticSystem RunConfig::system() const {
  if (has("preset")) {
    const double a0 = get_double("bump.amplitude", 0.5);
    const double r0 = get_positive("bump.radius", 1.0);
    try {
      return make_preset(get_string("preset", ""), a0, r0);
    } catch (const Error& e) {
      fail("preset", e.what());
    }
  }
  try {
    return make_expression_system(get_string("g11", ""), get_string("g12", ""), get_string("g22", ""),
                                  get_string("theta1", ""), get_string("theta2", ""));
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, origin_ + ": " + e.what());
  }
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, e] : values_) out += k + "=" + e.value + "\n";
  return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a(canonical()); }

}  // namespace magloop
