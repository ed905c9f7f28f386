#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace kinplan {

/// Flat view of a TOML-style file: `[section]` headers, `key = value` lines
/// and `#` comments. Keys are stored dotted (`section.key`). Values are kept
/// as text until bound to a schema; surrounding double quotes are removed.
class ConfigFile {
 public:
  /// Throws ConfigError on malformed lines or duplicate keys.
  static ConfigFile parse(std::istream& is, const std::string& source = "<input>");
  static ConfigFile load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  /// Applies "dotted.key=value"; throws ConfigError without '='.
  void apply_override(const std::string& assignment);

  const std::map<std::string, std::string>& entries() const { return values_; }
  bool contains(const std::string& key) const { return values_.count(key) != 0; }

 private:
  std::map<std::string, std::string> values_;
};

/// Typed bindings from dotted keys to fields. apply() rejects unknown keys and
/// unparsable values with ConfigError; write() echoes every bound key with
/// its current value, grouped by section, in a form parse() reads back.
class ConfigSchema {
 public:
  void add(const std::string& key, double* target, const std::string& doc = "");
  void add(const std::string& key, int* target, const std::string& doc = "");
  void add(const std::string& key, std::uint64_t* target, const std::string& doc = "");
  void add(const std::string& key, bool* target, const std::string& doc = "");
  void add(const std::string& key, std::string* target, const std::string& doc = "");
  /// String restricted to a fixed set of choices.
  void add_choice(const std::string& key, std::string* target, std::vector<std::string> choices,
                  const std::string& doc = "");

  void apply(const ConfigFile& file) const;
  void write(std::ostream& os) const;
  std::vector<std::string> keys() const;
  bool has(const std::string& key) const { return entries_.count(key) != 0; }

 private:
  struct Entry {
    std::function<void(const std::string&)> assign;
    std::function<std::string()> render;
    std::string doc;
  };
  void insert(const std::string& key, Entry e);
  std::map<std::string, Entry> entries_;
};

/// Writes the effective configuration to path; throws std::runtime_error on
/// I/O failure.
void write_effective_config(const std::string& path, const ConfigSchema& schema);

}  // namespace kinplan
