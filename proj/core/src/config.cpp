#include "hyperembed/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hyperembed/errors.hpp"

#include <nlohmann/json.hpp>

namespace hyperembed {

namespace {

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Removes a '#' comment that is outside of any quoted string.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  return std::all_of(key.begin(), key.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

struct TomlScalar {
  ConfigMap::Value value;
  enum Kind { Bool, Int, Double, String } kind;
};

TomlScalar parse_scalar(const std::string& raw, int lineno) {
  const std::string t = strip(raw);
  if (t.empty()) throw ParseError("empty value", lineno);
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"') throw ParseError("unterminated string", lineno);
    std::string out;
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
      char c = t[i];
      if (c == '\\' && i + 2 < t.size() + 1) {
        ++i;
        switch (t[i]) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case 'r': c = '\r'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: throw ParseError("unsupported escape in string", lineno);
        }
      }
      out += c;
    }
    return {out, TomlScalar::String};
  }
  if (t == "true") return {true, TomlScalar::Bool};
  if (t == "false") return {false, TomlScalar::Bool};
  const bool looks_float = t.find_first_of(".eE") != std::string::npos ||
                           t == "inf" || t == "-inf" || t == "nan";
  if (!looks_float) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec == std::errc() && ptr == t.data() + t.size()) return {v, TomlScalar::Int};
  }
  try {
    std::size_t pos = 0;
    const double d = std::stod(t, &pos);
    if (pos == t.size()) return {d, TomlScalar::Double};
  } catch (...) {
  }
  throw ParseError("cannot parse value '" + t + "'", lineno);
}

ConfigMap::Value parse_array(const std::string& body, int lineno) {
  std::vector<std::string> parts;
  std::string cur;
  bool in_string = false;
  for (char c : body) {
    if (c == '"') in_string = !in_string;
    if (c == ',' && !in_string) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!strip(cur).empty()) parts.push_back(cur);

  std::vector<TomlScalar> scalars;
  for (const auto& p : parts) {
    if (strip(p).empty()) continue;
    scalars.push_back(parse_scalar(p, lineno));
  }
  if (scalars.empty()) return std::vector<double>{};
  const bool any_string =
      std::any_of(scalars.begin(), scalars.end(),
                  [](const TomlScalar& s) { return s.kind == TomlScalar::String; });
  const bool any_double =
      std::any_of(scalars.begin(), scalars.end(),
                  [](const TomlScalar& s) { return s.kind == TomlScalar::Double; });
  if (any_string) {
    std::vector<std::string> out;
    for (const auto& s : scalars) {
      if (s.kind != TomlScalar::String) throw ParseError("mixed array element types", lineno);
      out.push_back(std::get<std::string>(s.value));
    }
    return out;
  }
  if (any_double) {
    std::vector<double> out;
    for (const auto& s : scalars) {
      if (s.kind == TomlScalar::Double) {
        out.push_back(std::get<double>(s.value));
      } else if (s.kind == TomlScalar::Int) {
        out.push_back(static_cast<double>(std::get<long long>(s.value)));
      } else {
        throw ParseError("mixed array element types", lineno);
      }
    }
    return out;
  }
  std::vector<long long> out;
  for (const auto& s : scalars) {
    if (s.kind != TomlScalar::Int) throw ParseError("mixed array element types", lineno);
    out.push_back(std::get<long long>(s.value));
  }
  return out;
}

}  // namespace

ConfigMap ConfigMap::from_toml(const std::string& text) {
  ConfigMap cfg;
  std::istringstream in(text);
  std::string line;
  std::string prefix;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated table header", lineno);
      const std::string name = strip(line.substr(1, line.size() - 2));
      if (!valid_key(name)) throw ParseError("invalid table name '" + name + "'", lineno);
      prefix = name + ".";
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    const std::string key = strip(line.substr(0, eq));
    if (!valid_key(key)) throw ParseError("invalid key '" + key + "'", lineno);
    std::string value = strip(line.substr(eq + 1));
    if (value.empty()) throw ParseError("missing value for key '" + key + "'", lineno);

    if (value.front() == '[') {
      // array; may continue over following lines until brackets balance
      while (std::count(value.begin(), value.end(), '[') >
             std::count(value.begin(), value.end(), ']')) {
        std::string more;
        if (!std::getline(in, more)) throw ParseError("unterminated array", lineno);
        ++lineno;
        value += strip(strip_comment(more));
      }
      if (value.back() != ']') throw ParseError("unterminated array", lineno);
      cfg.values_[prefix + key] = parse_array(value.substr(1, value.size() - 2), lineno);
    } else {
      cfg.values_[prefix + key] = parse_scalar(value, lineno).value;
    }
  }
  return cfg;
}

namespace {

void flatten_json(const nlohmann::json& j, const std::string& prefix, ConfigMap& cfg) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    const auto& v = it.value();
    if (v.is_object()) {
      flatten_json(v, key, cfg);
    } else if (v.is_boolean()) {
      cfg.set(key, v.get<bool>());
    } else if (v.is_number_integer() || v.is_number_unsigned()) {
      cfg.set(key, v.get<long long>());
    } else if (v.is_number_float()) {
      cfg.set(key, v.get<double>());
    } else if (v.is_string()) {
      cfg.set(key, v.get<std::string>());
    } else if (v.is_array()) {
      if (v.empty()) {
        cfg.set(key, std::vector<double>{});
      } else if (v.front().is_string()) {
        cfg.set(key, v.get<std::vector<std::string>>());
      } else if (std::all_of(v.begin(), v.end(),
                             [](const nlohmann::json& e) { return e.is_number_integer(); })) {
        cfg.set(key, v.get<std::vector<long long>>());
      } else if (std::all_of(v.begin(), v.end(),
                             [](const nlohmann::json& e) { return e.is_number(); })) {
        cfg.set(key, v.get<std::vector<double>>());
      } else {
        throw ConfigError("config key '" + key + "' has an unsupported array type");
      }
    } else {
      throw ConfigError("config key '" + key + "' has an unsupported value type");
    }
  }
}

}  // namespace

ConfigMap ConfigMap::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid JSON config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config JSON must be an object");
  ConfigMap cfg;
  flatten_json(j, "", cfg);
  return cfg;
}

ConfigMap ConfigMap::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") return from_json(text);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".toml") return from_toml(text);
  const std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return from_json(text);
  return from_toml(text);
}

std::vector<std::string> ConfigMap::keys() const {
  std::vector<std::string> out;
  out.reserve(values_.size());
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

const ConfigMap::Value& ConfigMap::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

bool ConfigMap::get_bool(const std::string& key) const {
  const Value& v = require(key);
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  throw ConfigError("config key '" + key + "' must be a boolean");
}

long long ConfigMap::get_int(const std::string& key) const {
  const Value& v = require(key);
  if (const long long* i = std::get_if<long long>(&v)) return *i;
  throw ConfigError("config key '" + key + "' must be an integer");
}

double ConfigMap::get_double(const std::string& key) const {
  const Value& v = require(key);
  if (const double* d = std::get_if<double>(&v)) return *d;
  if (const long long* i = std::get_if<long long>(&v)) return static_cast<double>(*i);
  throw ConfigError("config key '" + key + "' must be a number");
}

std::string ConfigMap::get_string(const std::string& key) const {
  const Value& v = require(key);
  if (const std::string* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError("config key '" + key + "' must be a string");
}

std::vector<long long> ConfigMap::get_int_list(const std::string& key) const {
  const Value& v = require(key);
  if (const auto* l = std::get_if<std::vector<long long>>(&v)) return *l;
  if (const long long* i = std::get_if<long long>(&v)) return {*i};
  throw ConfigError("config key '" + key + "' must be an integer array");
}

std::vector<double> ConfigMap::get_double_list(const std::string& key) const {
  const Value& v = require(key);
  if (const auto* l = std::get_if<std::vector<double>>(&v)) return *l;
  if (const auto* li = std::get_if<std::vector<long long>>(&v)) {
    return std::vector<double>(li->begin(), li->end());
  }
  if (const double* d = std::get_if<double>(&v)) return {*d};
  if (const long long* i = std::get_if<long long>(&v)) return {static_cast<double>(*i)};
  throw ConfigError("config key '" + key + "' must be a numeric array");
}

std::vector<std::string> ConfigMap::get_string_list(const std::string& key) const {
  const Value& v = require(key);
  if (const auto* l = std::get_if<std::vector<std::string>>(&v)) return *l;
  if (const std::string* s = std::get_if<std::string>(&v)) return {*s};
  throw ConfigError("config key '" + key + "' must be a string array");
}

bool ConfigMap::get_bool_or(const std::string& key, bool def) const {
  return has(key) ? get_bool(key) : def;
}
long long ConfigMap::get_int_or(const std::string& key, long long def) const {
  return has(key) ? get_int(key) : def;
}
double ConfigMap::get_double_or(const std::string& key, double def) const {
  return has(key) ? get_double(key) : def;
}
std::string ConfigMap::get_string_or(const std::string& key, const std::string& def) const {
  return has(key) ? get_string(key) : def;
}

FitConfig load_fit_config(const ConfigMap& config, const std::string& prefix) {
  FitConfig fc;
  fc.k = static_cast<int>(config.get_int_or(prefix + "k", fc.k));
  fc.c_prime = config.get_double_or(prefix + "c_prime", fc.c_prime);
  fc.c1 = config.get_double_or(prefix + "c1", fc.c1);
  fc.c2 = config.get_double_or(prefix + "c2", fc.c2);
  fc.c3_prime = config.get_double_or(prefix + "c3_prime", fc.c3_prime);
  fc.c4 = config.get_double_or(prefix + "c4", fc.c4);
  fc.c5 = config.get_double_or(prefix + "c5", fc.c5);
  fc.lambda = config.get_double_or(prefix + "lambda", fc.lambda);
  fc.step = config.get_double_or(prefix + "step", fc.step);
  fc.armijo_shrink = config.get_double_or(prefix + "armijo_shrink", fc.armijo_shrink);
  fc.armijo_slope = config.get_double_or(prefix + "armijo_slope", fc.armijo_slope);
  fc.tol = config.get_double_or(prefix + "tol", fc.tol);
  fc.max_iters = static_cast<int>(config.get_int_or(prefix + "max_iters", fc.max_iters));
  fc.seed = static_cast<std::uint64_t>(config.get_int_or(prefix + "seed", 0));
  fc.usvt_mult = config.get_double_or(prefix + "usvt_mult", fc.usvt_mult);
  fc.validate();
  return fc;
}

SimDesign load_sim_design(const ConfigMap& config, const std::string& prefix) {
  SimDesign d;
  d.n = static_cast<int>(config.get_int(prefix + "n"));
  d.m = static_cast<int>(config.get_int(prefix + "m"));
  d.k = static_cast<int>(config.get_int_or(prefix + "k", d.k));
  d.rho = config.get_double_or(prefix + "rho", d.rho);
  d.beta_star = config.get_double_or(prefix + "beta_star", d.beta_star);
  d.seed = static_cast<std::uint64_t>(config.get_int_or(prefix + "seed", 0));
  d.mc_reps = static_cast<int>(config.get_int_or(prefix + "mc_reps", d.mc_reps));
  d.validate();
  return d;
}

}  // namespace hyperembed
