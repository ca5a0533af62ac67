#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "magloop/config.hpp"
#include "magloop/records.hpp"
#include "magloop/solver.hpp"

namespace magloop {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNoOrbit = 3;
inline constexpr int kExitNumerical = 4;

struct RunOptions {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;  // overrides `seed` in the config
  std::optional<int> threads;         // overrides `threads` in the config
  std::ostream* log = nullptr;        // human-readable summary; null for silence
};

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<json> payloads;  // exactly what was appended to results.jsonl
};

CommandResult cmd_simulate(const RunConfig& cfg, const RunOptions& opts);
CommandResult cmd_find(const RunConfig& cfg, const RunOptions& opts);
CommandResult cmd_index(const RunConfig& cfg, const RunOptions& opts);
CommandResult cmd_mane(const RunConfig& cfg, const RunOptions& opts);
CommandResult cmd_scan(const RunConfig& cfg, const RunOptions& opts);
CommandResult cmd_report(const RunConfig& cfg, const RunOptions& opts);

/// Dispatches by name and maps errors to exit codes: 2 for configuration
/// errors, 3 for NoOrbitFound, 4 for any other numerical failure.
CommandResult run_command(const std::string& name, const RunConfig& cfg, const RunOptions& opts);
int exit_code_for(ErrorKind kind);

/// Solver options assembled from the `find.*`, `scan.*`, `N`, `seed` keys.
SolveOptions solve_options(const RunConfig& cfg, const RunOptions& opts);
ScanOptions scan_options(const RunConfig& cfg, const RunOptions& opts);

/// Builds the full record for an accepted orbit, including index report and
/// checks when `with_index` is set.
OrbitRecord make_orbit_record(const MagneticSystem& system, double k, const AcceptedOrbit& orbit,
                              std::uint64_t seed, bool with_index, const IndexOptions& index_opts);

}  // namespace magloop
