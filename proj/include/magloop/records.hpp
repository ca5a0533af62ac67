#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "magloop/index.hpp"
#include "magloop/loopspace.hpp"
#include "magloop/mane.hpp"

namespace magloop {

using json = nlohmann::json;

inline constexpr const char* kToolkitVersion = "0.3.0";

struct OrbitChecks {
  bool report_invariants = true;
  bool iteration_inequalities = true;
  bool doubled_inequalities = true;
  bool escape_bound = true;
  std::vector<std::string> failures;

  bool all_pass() const {
    return report_invariants && iteration_inequalities && doubled_inequalities && escape_bound;
  }
};

struct OrbitRecord {
  std::string system_hash;
  std::string system;
  double k = 0.0;
  int winding = 0;
  DiscreteLoop loop;
  double action = 0.0;
  double el_residual = 0.0;
  double speed_residual = 0.0;
  bool penalty_active = false;
  double sigma = 0.0;
  std::string origin;
  double x_star = 0.0;
  double p_y = 0.0;
  std::uint64_t seed = 0;
  std::optional<IndexReport> index;
  OrbitChecks checks;
};

json loop_to_json(const DiscreteLoop& loop);
DiscreteLoop loop_from_json(const json& j);

json index_to_json(const IndexReport& r);
IndexReport index_from_json(const json& j);

json orbit_to_json(const OrbitRecord& r);
/// Throws Error(Config) on malformed input.
OrbitRecord orbit_from_json(const json& j);

/// Type invariants of a stored record; empty when valid.
std::vector<std::string> validate_record(const OrbitRecord& r);

json bracket_to_json(const CriticalValueBracket& b);

/// Append-only JSON-lines file. Each line is
/// {"payload": {...}, "meta": {"timestamp": ...}}; the payload is fully
/// determined by config and seed.
class ResultsDB {
 public:
  explicit ResultsDB(std::string path) : path_(std::move(path)) {}

  void append(const json& payload) const;
  std::vector<json> payloads() const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace magloop
