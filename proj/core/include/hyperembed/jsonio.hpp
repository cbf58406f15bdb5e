#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <string>
#include <vector>

namespace hyperembed {

// Minimal JSON emitter. All exported documents are written through this so
// doubles render identically everywhere: %.17g round-trips IEEE-754 exactly
// and keeps outputs byte-stable run to run.

inline std::string json_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

class JsonWriter {
 public:
  std::string str() const { return out_; }

  JsonWriter& begin_object() { return raw("{"); }
  JsonWriter& end_object() { return raw("}"); }
  JsonWriter& begin_array() { return raw("["); }
  JsonWriter& end_array() { return raw("]"); }
  JsonWriter& comma() { return raw(","); }
  JsonWriter& key(const std::string& k) { return raw("\"" + json_escape(k) + "\":"); }

  JsonWriter& value(double x) { return raw(json_double(x)); }
  JsonWriter& value(int x) { return raw(std::to_string(x)); }
  JsonWriter& value(long long x) { return raw(std::to_string(x)); }
  JsonWriter& value(unsigned long long x) { return raw(std::to_string(x)); }
  JsonWriter& value(bool b) { return raw(b ? "true" : "false"); }
  JsonWriter& value(const std::string& s) { return raw("\"" + json_escape(s) + "\""); }
  JsonWriter& value(const char* s) { return value(std::string(s)); }

  JsonWriter& value(const Eigen::VectorXd& v) {
    begin_array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i) comma();
      value(v[i]);
    }
    return end_array();
  }

  // Matrices serialize as nested row-major arrays.
  JsonWriter& value(const Eigen::MatrixXd& m) {
    begin_array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (r) comma();
      begin_array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) comma();
        value(m(r, c));
      }
      end_array();
    }
    return end_array();
  }

  template <typename T>
  JsonWriter& value(const std::vector<T>& v) {
    begin_array();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) comma();
      value(v[i]);
    }
    return end_array();
  }

  template <typename T>
  JsonWriter& field(const std::string& k, const T& v, bool leading_comma = true) {
    if (leading_comma) comma();
    key(k);
    return value(v);
  }

  JsonWriter& raw(const std::string& s) {
    out_ += s;
    return *this;
  }

 private:
  std::string out_;
};

}  // namespace hyperembed
