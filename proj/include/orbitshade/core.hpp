#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace orbitshade {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr const char* kToolVersion = "0.3.1";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed field-definition text. Line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column)
      : Error(what + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class UnknownSymbolError : public ParseError {
 public:
  UnknownSymbolError(const std::string& name, int line, int column)
      : ParseError("unknown symbol '" + name + "'", line, column), name_(name) {}
  const std::string& symbol() const { return name_; }

 private:
  std::string name_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Evaluation produced a non-finite value.
class FieldError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double last_time)
      : Error(what + " (last valid time " + std::to_string(last_time) + ")"), last_time_(last_time) {}
  double last_time() const { return last_time_; }

 private:
  double last_time_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace orbitshade
