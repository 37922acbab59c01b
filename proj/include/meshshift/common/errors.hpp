#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace meshshift {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value became NaN/Inf, or an evaluation produced one.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A segment reduction was asked to reduce an empty segment.
class DegenerateSegmentError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class InsufficientBatchError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SelectionError : public Error {
 public:
  using Error::Error;
};

/// Raised when a code path requests data its context is not entitled to.
class PolicyError : public Error {
 public:
  using Error::Error;
};

class FieldSchemaError : public Error {
 public:
  using Error::Error;
};

class DegenerateFieldError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or written, or an output already exists.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary or JSON artifact. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace meshshift
