#pragma once

#include <stdexcept>
#include <string>

namespace mmbs {

// Exit codes surfaced by the CLI. Library code throws; the CLI maps.
enum class ErrorKind { Config = 2, Data = 3, Numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

// Removal of the category prefix left nothing but punctuation.
class RemovalEmpty : public DataError {
 public:
  explicit RemovalEmpty(const std::string& what) : DataError(what) {}
};

}  // namespace mmbs
