#pragma once

#include <stdexcept>
#include <string>

namespace mulr {

// Error categories map onto the CLI exit codes (1 usage, 2 data, 3 numeric).
enum class ErrorKind { Usage = 1, Data = 2, Numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string &what) : Error(ErrorKind::Usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string &what) : Error(ErrorKind::Data, what) {}
};

// Malformed input with a 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(const std::string &source, std::size_t line, const std::string &what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string &what) : Error(ErrorKind::Numeric, what) {}
};

}  // namespace mulr
