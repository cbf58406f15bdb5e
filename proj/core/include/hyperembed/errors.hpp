#pragma once

#include <stdexcept>
#include <string>

namespace hyperembed {

// Error taxonomy mirrored by the CLI exit codes: config=2, data=3, numerical=4.

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& msg, int line)
      : DataError("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

class RankDeficiencyError : public NumericalError {
 public:
  explicit RankDeficiencyError(const std::string& msg) : NumericalError(msg) {}
};

}  // namespace hyperembed
