#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tsel {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An id (task, target, intermediate) is not known to the container queried.
class LookupError : public Error {
 public:
  explicit LookupError(const std::string& id)
      : Error("unknown id '" + id + "'"), id_(id) {}
  LookupError(const std::string& id, const std::string& what)
      : Error(what), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

/// A numeric argument lies outside the domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Two inputs disagree on shape or id sets.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// The requested method cannot be applied to the given data.
class UnsupportedConfigError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented invariant of a domain type.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text. Line and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line = 0, std::size_t column = 0)
      : Error(format(msg, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& msg, std::size_t line, std::size_t column) {
    if (line == 0) return msg;
    std::string out = "line " + std::to_string(line);
    if (column != 0) out += ", column " + std::to_string(column);
    return out + ": " + msg;
  }

  std::size_t line_;
  std::size_t column_;
};

/// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Bundled fixture content does not match its frozen hash.
class FixtureIntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsel
