#include "kinplan/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kinplan/errors.hpp"

namespace kinplan {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty() || k.front() == '.' || k.back() == '.') return false;
  return std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
  });
}

// Removes a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

std::string unquote(const std::string& v, const std::string& where) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  if (v.find('"') != std::string::npos) throw ConfigError(where + ": unbalanced quotes");
  return v;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end)
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  return out;
}

std::string render_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Shortest form that round-trips.
  for (int p = 1; p <= 17; ++p) {
    char s[32];
    std::snprintf(s, sizeof s, "%.*g", p, v);
    if (std::strtod(s, nullptr) == v) return s;
  }
  return buf;
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& is, const std::string& source) {
  ConfigFile f;
  std::string line, section;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const std::string where = source + ":" + std::to_string(n);
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (!valid_key(section)) throw ConfigError(where + ": invalid section name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (!valid_key(key)) throw ConfigError(where + ": invalid key '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (f.values_.count(full)) throw ConfigError(where + ": duplicate key '" + full + "'");
    f.values_[full] = unquote(trim(s.substr(eq + 1)), where);
  }
  return f;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  return parse(is, path);
}

void ConfigFile::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' lacks '='");
  const std::string key = trim(assignment.substr(0, eq));
  if (!valid_key(key)) throw ConfigError("override has invalid key '" + key + "'");
  values_[key] = unquote(trim(assignment.substr(eq + 1)), "override " + key);
}

void ConfigSchema::insert(const std::string& key, Entry e) {
  if (!valid_key(key) || entries_.count(key)) throw std::logic_error("bad schema key " + key);
  entries_.emplace(key, std::move(e));
}

void ConfigSchema::add(const std::string& key, double* t, const std::string& doc) {
  insert(key, {[key, t](const std::string& v) {
                 const double d = parse_number<double>(key, v);
                 if (!std::isfinite(d)) throw ConfigError("config key '" + key + "' must be finite");
                 *t = d;
               },
               [t] { return render_double(*t); }, doc});
}

void ConfigSchema::add(const std::string& key, int* t, const std::string& doc) {
  insert(key, {[key, t](const std::string& v) { *t = parse_number<int>(key, v); },
               [t] { return std::to_string(*t); }, doc});
}

void ConfigSchema::add(const std::string& key, std::uint64_t* t, const std::string& doc) {
  insert(key, {[key, t](const std::string& v) { *t = parse_number<std::uint64_t>(key, v); },
               [t] { return std::to_string(*t); }, doc});
}

void ConfigSchema::add(const std::string& key, bool* t, const std::string& doc) {
  insert(key, {[key, t](const std::string& v) {
                 if (v == "true")
                   *t = true;
                 else if (v == "false")
                   *t = false;
                 else
                   throw ConfigError("config key '" + key + "' expects true or false");
               },
               [t] { return std::string(*t ? "true" : "false"); }, doc});
}

void ConfigSchema::add(const std::string& key, std::string* t, const std::string& doc) {
  insert(key, {[t](const std::string& v) { *t = v; }, [t] { return "\"" + *t + "\""; }, doc});
}

void ConfigSchema::add_choice(const std::string& key, std::string* t,
                              std::vector<std::string> choices, const std::string& doc) {
  insert(key, {[key, t, choices](const std::string& v) {
                 if (std::find(choices.begin(), choices.end(), v) == choices.end()) {
                   std::string msg = "config key '" + key + "' must be one of:";
                   for (const auto& c : choices) msg += " " + c;
                   throw ConfigError(msg);
                 }
                 *t = v;
               },
               [t] { return "\"" + *t + "\""; }, doc});
}

void ConfigSchema::apply(const ConfigFile& file) const {
  for (const auto& [key, value] : file.entries()) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.assign(value);
  }
}

void ConfigSchema::write(std::ostream& os) const {
  std::string current;
  bool first = true;
  // Keys without a section first, then one block per section.
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& [key, e] : entries_) {
      const auto dot = key.rfind('.');
      if ((dot == std::string::npos) != (pass == 0)) continue;
      const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
      const std::string leaf = dot == std::string::npos ? key : key.substr(dot + 1);
      if (section != current) {
        os << (first ? "" : "\n") << "[" << section << "]\n";
        current = section;
      }
      first = false;
      os << leaf << " = " << e.render();
      if (!e.doc.empty()) os << "  # " << e.doc;
      os << "\n";
    }
}

std::vector<std::string> ConfigSchema::keys() const {
  std::vector<std::string> out;
  for (const auto& kv : entries_) out.push_back(kv.first);
  return out;
}

void write_effective_config(const std::string& path, const ConfigSchema& schema) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  schema.write(os);
}

}  // namespace kinplan
