#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stfem/adaptivity.hpp"
#include "stfem/problem.hpp"

namespace stfem {

/// Flat `key = value` text. `#` starts a comment; blank lines are ignored. Keys may
/// contain dots. Every error names the offending line.
class ConfigFile {
 public:
  static ConfigFile parse(std::istream& is, const std::string& source = "<config>");
  static ConfigFile load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> raw(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Whitespace or comma separated integers.
  std::vector<int> get_ints(const std::string& key, std::vector<int> fallback) const;

  /// Throws on the first key that is not in `known`.
  void check_keys(const std::vector<std::string>& known) const;

 private:
  struct Entry {
    std::string value;
    int line;
  };
  [[noreturn]] void bad_value(const std::string& key, const std::string& expected) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
};

/// A complete study description: problem choice plus every solver and estimator knob.
struct StudyConfig {
  std::string problem = "slit";  // slit | smooth | sin-x-t3 | t-x-1mx
  std::string geometry = "unit_square";  // slit only: unit_square | classical
  double alpha = 0.5;
  int spatial_dim = 1;  // smooth only
  StudySetup setup;

  ProblemSpec make_problem() const;
};

/// Keys accepted by study_config_from; documented in the README.
const std::vector<std::string>& study_config_keys();

StudyConfig study_config_from(const ConfigFile& file);
StudyConfig load_study_config(const std::string& path);

}  // namespace stfem
