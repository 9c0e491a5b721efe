#pragma once

// Experiment configuration files.
//
// Grammar: INI. `key = value` lines; `[section]` headers open a table;
// lines starting with `;` or `#` are comments. Keys before the first
// section are top-level (kind, seed, output). Inside the program a key is
// addressed as "section.key". Every key in the file must be consumed by the
// experiment, so misspelled keys are reported instead of silently ignored.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "homlab/signals.hpp"

namespace homlab {

class Config {
 public:
  Config() = default;

  static Config parse(std::istream& is, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::optional<std::string> get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;

  std::optional<double> get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Comma-separated list of numbers (angles accepted when `angles`).
  std::optional<std::vector<double>> get_list(const std::string& key, bool angles = false) const;

  /// Relative paths in a config are resolved against the config's directory.
  std::filesystem::path resolve_path(const std::string& value) const;

  /// Throws ConfigError naming every key that no reader asked for.
  void require_all_used() const;

  const std::string& source() const { return source_; }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::string source_ = "<config>";
  std::filesystem::path base_dir_;
};

/// Radians from "1.25", "pi", "-pi/2", "3pi/2", "3*pi/4" or "90deg".
double parse_angle(const std::string& text);

/// "uniform", "discrete:0,pi", "weighted:0@0.25,pi@0.75".
PhaseDistribution parse_phase_distribution(const std::string& text);

}  // namespace homlab
