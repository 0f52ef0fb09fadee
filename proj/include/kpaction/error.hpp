#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kpaction {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition or a config value is invalid.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Tensor, window or dataset dimensions do not line up.
class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// TP + FN == 0 for the requested class.
class UndefinedRateError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Filesystem failure: missing file, unwritable directory, short read.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public IoError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : IoError(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class VersionMismatchError : public IoError {
 public:
  using IoError::IoError;
};

class ChecksumError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace kpaction
