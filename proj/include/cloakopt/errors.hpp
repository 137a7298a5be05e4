#pragma once

#include <stdexcept>
#include <string>

namespace cloakopt {

/// Base class for all errors raised by the library. The CLI maps the
/// concrete type to a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Bad or inconsistent scenario configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Mesh layouts the solver does not handle, e.g. an obstacle that touches
/// the outer boundary.
class TopologyError : public Error {
 public:
  using Error::Error;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

/// Factorization failure or an unacceptable linear residual (exit code 3).
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Evaluation outside the domain of a function (log barrier at an infeasible
/// point, efficiency with a zero baseline, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  ParseError(int line, const std::string& what)
      : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace cloakopt
