#pragma once

#include "fpnet/engine.hpp"
#include "fpnet/scheduling.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace fpnet {

/// One recognised configuration key with its default value.
struct ConfigKey {
  std::string section;
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every recognised key, in echo order.
const std::vector<ConfigKey>& config_schema();

/// Flat `section.key -> value` store restricted to the schema. Unset keys
/// read as their defaults.
class ConfigDoc {
 public:
  ConfigDoc();

  const std::string& get(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);
  bool is_default(const std::string& section, const std::string& key) const;

  double get_double(const std::string& section, const std::string& key) const;
  long get_long(const std::string& section, const std::string& key) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;

  /// Every key in schema order, `[section]` headers and `key = value` lines.
  std::string to_text() const;

  bool operator==(const ConfigDoc& other) const { return values_ == other.values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Grammar: `# comment`, blank lines, `[section]`, `key = value`. Unknown
/// sections or keys, duplicates and malformed lines raise ParseError naming
/// the line and key.
ConfigDoc parse_config(const std::string& text, const std::string& origin = "<config>");
ConfigDoc load_config(const std::string& path);

/// Applies `section.key=value`; unknown keys are errors.
void apply_override(ConfigDoc& doc, const std::string& assignment);

/// A config resolved into engine inputs. `resolved` records every value that
/// was derived rather than read (auto gamma, D, x*, declared constants).
struct ResolvedRun {
  RunConfig run;
  std::vector<std::pair<std::string, std::string>> resolved;
  ValidationReport governing;  // theorem1 for inv_sqrt steps, theorem2 for inv_linear
  std::vector<ValidationReport> reports;
};

ResolvedRun resolve(const ConfigDoc& doc);

/// Sidecar: the config echo followed by a `[run]` metadata section.
struct Sidecar {
  ConfigDoc config;
  std::vector<std::pair<std::string, std::string>> meta;
};

std::string sidecar_text(const ConfigDoc& doc, const std::vector<std::pair<std::string, std::string>>& meta);
Sidecar parse_sidecar(const std::string& text, const std::string& origin = "<sidecar>");

}  // namespace fpnet
