#pragma once

#include <stdexcept>
#include <string>

namespace nidsdl {

// Exit-code classes used by the command-line front end.
enum class ErrorKind { usage = 1, data = 2, verification = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class VerificationError : public Error {
 public:
  explicit VerificationError(const std::string& what) : Error(ErrorKind::verification, what) {}
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnseenCategory : public DataError {
 public:
  UnseenCategory(const std::string& feature, const std::string& value)
      : DataError("unseen category '" + value + "' for feature '" + feature + "'"),
        feature_(feature),
        value_(value) {}

  const std::string& feature() const noexcept { return feature_; }
  const std::string& value() const noexcept { return value_; }

 private:
  std::string feature_;
  std::string value_;
};

// Shape disagreement inside the neural-network engine.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace nidsdl
