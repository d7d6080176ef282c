#pragma once

#include <stdexcept>
#include <string>

namespace anavi {

// Process exit codes used by the command line tool.
enum class ErrorKind { usage = 2, data = 3, no_path = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Malformed or inconsistent input data (files, geometry, datasets, models).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

// Caller violated an operation's preconditions.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what)
      : Error(ErrorKind::usage, what) {}
};

class NoPathError : public Error {
 public:
  explicit NoPathError(const std::string& what)
      : Error(ErrorKind::no_path, what) {}
};

}  // namespace anavi
