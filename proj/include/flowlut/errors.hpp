#pragma once

#include <stdexcept>
#include <string>

namespace flowlut {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents are incompatible with the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An extent is too small (or otherwise out of range) for the operation.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// API misuse: backward on a non-scalar, K = 0, out-of-range pixel values.
class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed text or binary input. `location()` is a line number for text
/// formats and a byte offset for binary ones.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t location)
      : Error(what), location_(location) {}
  std::size_t location() const noexcept { return location_; }

 private:
  std::size_t location_;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint could not be restored. `section()` names the section being
/// read when the failure happened ("header" before any section).
class LoadError : public Error {
 public:
  LoadError(const std::string& what, std::string section)
      : Error(what), section_(std::move(section)) {}
  const std::string& section() const noexcept { return section_; }

 private:
  std::string section_;
};

}  // namespace flowlut
