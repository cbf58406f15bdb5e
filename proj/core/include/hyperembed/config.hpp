#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "hyperembed/estimator.hpp"
#include "hyperembed/simulate.hpp"

namespace hyperembed {

// Flat key/value view of a config file. TOML is primary ([section] headers
// become dotted prefixes); JSON objects flatten the same way. Only scalars
// and arrays of scalars are allowed as values.
class ConfigMap {
 public:
  using Value = std::variant<bool, long long, double, std::string,
                             std::vector<long long>, std::vector<double>,
                             std::vector<std::string>>;

  static ConfigMap from_file(const std::string& path);
  static ConfigMap from_toml(const std::string& text);
  static ConfigMap from_json(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::vector<std::string> keys() const;

  bool get_bool(const std::string& key) const;
  long long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::vector<long long> get_int_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  bool get_bool_or(const std::string& key, bool def) const;
  long long get_int_or(const std::string& key, long long def) const;
  double get_double_or(const std::string& key, double def) const;
  std::string get_string_or(const std::string& key, const std::string& def) const;

  void set(const std::string& key, Value v) { values_[key] = std::move(v); }

 private:
  const Value& require(const std::string& key) const;
  std::map<std::string, Value> values_;
};

// Reads the optional fit.* keys of a config, falling back to defaults.
FitConfig load_fit_config(const ConfigMap& config, const std::string& prefix = "fit.");
SimDesign load_sim_design(const ConfigMap& config, const std::string& prefix = "sim.");

}  // namespace hyperembed
