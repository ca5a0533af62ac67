#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "magloop/geometry.hpp"

namespace magloop {

inline constexpr int kConfigSchema = 1;

/// Parsed key = value configuration. Lines are `key = value`, `#` starts a
/// comment, and `schema = 1` is mandatory. Unknown keys are rejected.
class RunConfig {
 public:
  /// Throws Error(Config) naming the line and key of the first problem.
  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
  static RunConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;

  /// Positive real; throws Error(Config) otherwise.
  double get_positive(const std::string& key, double fallback) const;

  MagneticSystem system() const;

  /// Canonical `key=value` lines, sorted; the basis of the config hash.
  std::string canonical() const;
  std::uint64_t hash() const;

  static const std::vector<std::string>& known_keys();

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const;

  std::map<std::string, Entry> values_;
  std::string origin_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& s);
std::string hex64(std::uint64_t v);

}  // namespace magloop
