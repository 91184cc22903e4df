#pragma once

#include <stdexcept>
#include <string>

namespace optbench {

// Exit codes shared by the CLI.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kNumerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Bad configuration: unknown names, inconsistent ranges, empty grids.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, ExitCode::kConfig) {}
};

// Bad input data: malformed CSV rows, invariant violations.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what, ExitCode::kData) {}
};

// Argument outside a function's mathematical domain.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what, ExitCode::kData) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what, ExitCode::kNumerical) {}
};

}  // namespace optbench
