// Flat key = value experiment configuration.
//
// Format: one `key = value` pair per line; `#` starts a comment anywhere;
// blank lines are ignored; keys use dotted sections (`select.k`); duplicate
// keys are an error. Values are strings, numbers, comma/space-separated
// number lists, or inclusive ranges `first:step:last`.
//
// Every lookup records the key as read, so a runner can reject misspelled
// or stray keys with file/line context after it has consumed the ones it
// understands.
#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace genis {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail_config {

inline std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

inline bool parse_long(const std::string& s, long long& out) {
  if (s.empty()) return false;
  try {
    size_t used = 0;
    out = std::stoll(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace detail_config

class Config {
 public:
  Config() = default;

  static Config from_text(const std::string& text, const std::string& name = "<config>") {
    Config cfg;
    cfg.name_ = name;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      std::string line = raw;
      if (const size_t hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = detail_config::trim(line);
      if (line.empty()) continue;
      const size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(name + ": line " + std::to_string(lineno) +
                          ": expected 'key = value', got '" + line + "'");
      const std::string key = detail_config::trim(line.substr(0, eq));
      const std::string value = detail_config::trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(name + ": line " + std::to_string(lineno) + ": empty key");
      const auto prev = cfg.entries_.find(key);
      if (prev != cfg.entries_.end())
        throw ConfigError(name + ": line " + std::to_string(lineno) + ": duplicate key '" +
                          key + "' (first set at line " + std::to_string(prev->second.line) +
                          ")");
      cfg.entries_[key] = Entry{value, lineno};
    }
    return cfg;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return from_text(os.str(), path);
  }

  const std::string& name() const { return name_; }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  int line(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  // "file: key 'k' (line N)" — the prefix for value-level error messages.
  std::string context(const std::string& key) const {
    std::string out = name_ + ": key '" + key + "'";
    if (const int l = line(key); l > 0) out += " (line " + std::to_string(l) + ")";
    return out;
  }

  std::string get_string(const std::string& key) const { return fetch(key); }
  std::string get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? fetch(key) : fallback;
  }

  double get_double(const std::string& key) const { return to_double(key, fetch(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  int get_int(const std::string& key) const {
    long long v = to_long(key, fetch(key));
    if (v < INT32_MIN || v > INT32_MAX)
      throw ConfigError(context(key) + ": integer out of range");
    return static_cast<int>(v);
  }
  int get_int(const std::string& key, int fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  std::uint64_t get_uint64(const std::string& key) const {
    const std::string v = fetch(key);
    try {
      size_t used = 0;
      const std::uint64_t out = std::stoull(v, &used);
      if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError(context(key) + ": expected a nonnegative integer, got '" + v + "'");
  }
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_uint64(key) : fallback;
  }

  bool get_bool(const std::string& key) const {
    const std::string v = fetch(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(context(key) + ": expected true or false, got '" + v + "'");
  }
  bool get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
  }

  // Number list: either `a, b, c` (commas and/or spaces) or an inclusive
  // range `first:step:last`. An empty value is an empty list.
  std::vector<double> get_numbers(const std::string& key) const {
    const std::string v = fetch(key);
    if (v.empty()) return {};
    if (v.find(':') != std::string::npos) return expand_range(key, v);
    std::string spaced = v;
    for (char& c : spaced)
      if (c == ',') c = ' ';
    std::istringstream in(spaced);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(to_double(key, tok));
    return out;
  }
  std::vector<double> get_numbers(const std::string& key,
                                  const std::vector<double>& fallback) const {
    return has(key) ? get_numbers(key) : fallback;
  }

  std::vector<int> get_ints(const std::string& key) const {
    std::vector<int> out;
    for (double v : get_numbers(key)) {
      if (!(std::floor(v) == v) || v < INT32_MIN || v > INT32_MAX)
        throw ConfigError(context(key) + ": expected integers");
      out.push_back(static_cast<int>(v));
    }
    return out;
  }
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const {
    return has(key) ? get_ints(key) : fallback;
  }

  // Keys present in the file but never read (sorted); used by runners to
  // reject typos. allow_prefix marks a whole section as intentionally
  // readable by another command.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [key, entry] : entries_)
      if (!used_.count(key)) out.push_back(key);
    return out;
  }

  void allow_prefix(const std::string& prefix) const {
    for (const auto& [key, entry] : entries_)
      if (key.rfind(prefix, 0) == 0) used_.insert(key);
  }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };

  const std::string& fetch(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end())
      throw ConfigError(name_ + ": missing required key '" + key + "'");
    used_.insert(key);
    return it->second.value;
  }

  double to_double(const std::string& key, const std::string& v) const {
    double out = 0.0;
    if (!detail_config::parse_double(v, out))
      throw ConfigError(context(key) + ": expected a number, got '" + v + "'");
    return out;
  }

  long long to_long(const std::string& key, const std::string& v) const {
    long long out = 0;
    if (!detail_config::parse_long(v, out))
      throw ConfigError(context(key) + ": expected an integer, got '" + v + "'");
    return out;
  }

  std::vector<double> expand_range(const std::string& key, const std::string& v) const {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : v) {
      if (c == ':') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(cur);
    if (parts.size() != 3)
      throw ConfigError(context(key) + ": a range is 'first:step:last', got '" + v + "'");
    const double a = to_double(key, detail_config::trim(parts[0]));
    const double step = to_double(key, detail_config::trim(parts[1]));
    const double b = to_double(key, detail_config::trim(parts[2]));
    if (step == 0.0)
      throw ConfigError(context(key) + ": range step must be nonzero in '" + v + "'");
    if ((b - a) / step < 0.0)
      throw ConfigError(context(key) + ": range '" + v + "' is empty");
    const double tol = std::abs(step) * 1e-9;
    std::vector<double> out;
    for (int i = 0;; ++i) {
      const double val = a + i * step;
      if (step > 0.0 ? val > b + tol : val < b - tol) break;
      out.push_back(val);
      if (out.size() > 10'000'000)
        throw ConfigError(context(key) + ": range '" + v + "' is too large");
    }
    return out;
  }

  std::string name_ = "<config>";
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> used_;
};

}  // namespace genis
