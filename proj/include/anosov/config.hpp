#pragma once

// Run configuration: INI-style sections of `key = value` lines (read with
// CLI11's config reader), checked against a fixed schema.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "anosov/core.hpp"
#include "anosov/systems.hpp"

namespace anosov {

using ConfigValues = std::vector<std::string>;

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema{
      {"system", {"type", "matrix", "roof_constant", "roof_term", "generator", "relation"}},
      {"orbits", {"tmax", "max_word_length"}},
      {"zeta", {"re_min", "re_max", "im_min", "im_max", "grid", "tmax", "function", "degree", "fit_lo", "fit_hi"}},
      {"trace", {"n", "eps", "grid", "degree"}},
      {"resonances", {"trunc", "weight_s", "perturb_delta", "radius", "width", "stability_trunc"}},
      {"recurrence", {"eps", "te", "T", "samples", "seed"}},
      {"escape", {"width", "window", "f1_window", "cone", "probe_trunc", "probe_s"}},
      {"run", {"out", "workers"}},
  };
  return schema;
}

/// Parses "0.25", "1e-3" or "1/16".
inline double parse_number(const std::string& text) {
  const auto slash = text.find('/');
  try {
    std::size_t used = 0;
    if (slash != std::string::npos) {
      const double a = std::stod(text.substr(0, slash), &used);
      if (used != slash) throw std::invalid_argument(text);
      const std::string den = text.substr(slash + 1);
      const double b = std::stod(den, &used);
      if (used != den.size() || b == 0.0) throw std::invalid_argument(text);
      return a / b;
    }
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::logic_error&) {
    fail("ConfigError", "not a number: '" + text + "'");
  }
}

inline std::int64_t parse_integer(const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::logic_error&) {
    fail("ConfigError", "not an integer: '" + text + "'");
  }
}

/// Splits "a,b, c" and "a b c" into tokens.
inline ConfigValues split_list(const std::string& text) {
  ConfigValues out;
  std::string cur;
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

class RunConfig {
 public:
  bool has(const std::string& section, const std::string& key) const {
    const auto s = values_.find(section);
    return s != values_.end() && s->second.count(key) > 0;
  }

  void set(const std::string& section, const std::string& key, ConfigValues v) {
    check_key(section, key);
    values_[section][key] = std::move(v);
  }

  const ConfigValues& raw(const std::string& section, const std::string& key) const {
    if (!has(section, key)) fail("MissingParameter", "[" + section + "] " + key + " is required");
    return values_.at(section).at(key);
  }

  std::string text(const std::string& section, const std::string& key) const {
    const auto& v = raw(section, key);
    if (v.size() != 1) fail("ConfigError", "[" + section + "] " + key + " expects one value");
    return v.front();
  }

  double number(const std::string& section, const std::string& key) const { return parse_number(text(section, key)); }

  double number(const std::string& section, const std::string& key, double lo, double hi) const {
    const double v = number(section, key);
    if (!(v >= lo && v <= hi))
      fail("OutOfRange", "[" + section + "] " + key + " = " + text(section, key) + " outside [" + fmt(lo) + ", " +
                             fmt(hi) + "]");
    return v;
  }

  std::int64_t integer(const std::string& section, const std::string& key, std::int64_t lo, std::int64_t hi) const {
    const auto v = parse_integer(text(section, key));
    if (v < lo || v > hi)
      fail("OutOfRange", "[" + section + "] " + key + " = " + std::to_string(v) + " outside [" + std::to_string(lo) +
                             ", " + std::to_string(hi) + "]");
    return v;
  }

  std::vector<double> numbers(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : raw(section, key)) out.push_back(parse_number(s));
    return out;
  }

  const std::map<std::string, std::map<std::string, ConfigValues>>& values() const { return values_; }

  static void check_key(const std::string& section, const std::string& key) {
    const auto& schema = config_schema();
    const auto s = schema.find(section);
    if (s == schema.end()) fail("ConfigError", "unknown section [" + section + "]");
    if (!s->second.count(key)) fail("ConfigError", "unknown key '" + key + "' in [" + section + "]");
  }

 private:
  static std::string fmt(double v) {
    std::ostringstream o;
    o << v;
    return o.str();
  }

  std::map<std::string, std::map<std::string, ConfigValues>> values_;
};

inline RunConfig parse_config(std::istream& in) {
  CLI::ConfigINI reader;
  std::vector<CLI::ConfigItem> items;
  try {
    items = reader.from_config(in);
  } catch (const CLI::Error& e) {
    fail("ConfigError", e.what());
  }
  RunConfig cfg;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (item.parents.size() != 1) fail("ConfigError", "key '" + item.name + "' outside a section");
    ConfigValues v;
    for (const auto& s : item.inputs)
      for (auto& t : split_list(s)) v.push_back(std::move(t));
    if (v.empty()) fail("ConfigError", "empty value for '" + item.name + "' in [" + item.parents[0] + "]");
    cfg.set(item.parents[0], item.name, std::move(v));
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("ConfigError", "cannot open config file " + path);
  return parse_config(in);
}

// ---------------------------------------------------------------------------
// Systems from the [system] section

using ConfiguredSystem = std::variant<SuspensionSystem, FuchsianSystem>;

inline CatMapSystem config_cat_map(const RunConfig& cfg) {
  const auto& m = cfg.raw("system", "matrix");
  if (m.size() != 4) fail("ConfigError", "[system] matrix expects 4 integers");
  return build_cat_map(parse_integer(m[0]), parse_integer(m[1]), parse_integer(m[2]), parse_integer(m[3]));
}

inline ConfiguredSystem config_system(const RunConfig& cfg) {
  const std::string type = cfg.text("system", "type");
  if (type == "catmap") {
    for (const char* k : {"roof_constant", "roof_term", "generator", "relation"})
      if (cfg.has("system", k)) fail("ConfigError", std::string("[system] ") + k + " is not valid for type catmap");
    return unit_suspension(config_cat_map(cfg));
  }
  if (type == "suspension") {
    for (const char* k : {"generator", "relation"})
      if (cfg.has("system", k)) fail("ConfigError", std::string("[system] ") + k + " is not valid for type suspension");
    TrigPolynomial roof{cfg.number("system", "roof_constant"), {}};
    if (cfg.has("system", "roof_term")) {
      const auto& r = cfg.raw("system", "roof_term");
      if (r.size() % 4 != 0) fail("ConfigError", "[system] roof_term rows have 4 entries: k1 k2 amplitude phase");
      for (std::size_t i = 0; i < r.size(); i += 4)
        roof.terms.push_back({static_cast<int>(parse_integer(r[i])), static_cast<int>(parse_integer(r[i + 1])),
                              parse_number(r[i + 2]), parse_number(r[i + 3])});
    }
    return build_suspension(config_cat_map(cfg), std::move(roof));
  }
  if (type == "fuchsian") {
    for (const char* k : {"matrix", "roof_constant", "roof_term"})
      if (cfg.has("system", k)) fail("ConfigError", std::string("[system] ") + k + " is not valid for type fuchsian");
    const auto& g = cfg.raw("system", "generator");
    if (g.empty() || g.size() % 4 != 0) fail("ConfigError", "[system] generator rows have 4 entries: a b c d");
    std::vector<Matrix2> gens;
    for (std::size_t i = 0; i < g.size(); i += 4) {
      Matrix2 m;
      m << parse_number(g[i]), parse_number(g[i + 1]), parse_number(g[i + 2]), parse_number(g[i + 3]);
      gens.push_back(m);
    }
    std::vector<Word> rels;
    if (cfg.has("system", "relation"))
      for (const auto& w : cfg.raw("system", "relation")) rels.push_back(parse_word(w));
    return build_fuchsian(std::move(gens), std::move(rels));
  }
  fail("ConfigError", "[system] type must be catmap, suspension or fuchsian, got '" + type + "'");
}

}  // namespace anosov
