#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rnf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument value (empty list, bad axis, non-scalar loss, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A sentence has fewer tokens than the filter window and no padding was applied.
class SentenceTooShortError : public Error {
 public:
  SentenceTooShortError(std::size_t length, std::size_t window)
      : Error("sentence of length " + std::to_string(length) +
              " is shorter than window " + std::to_string(window)),
        length_(length),
        window_(window) {}
  std::size_t length() const { return length_; }
  std::size_t window() const { return window_; }

 private:
  std::size_t length_;
  std::size_t window_;
};

/// Malformed s-expression; carries the byte offset where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Malformed line-oriented input; carries the 1-based line number.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Checkpoint could not be loaded; `field()` names the offending field.
class LoadError : public Error {
 public:
  LoadError(const std::string& field, const std::string& what)
      : Error("checkpoint field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Vocabulary or model configuration does not match a checkpoint.
class MismatchError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid training data (e.g. a label outside the class range).
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file could not be written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Every trial of a hyperparameter search failed.
class SearchError : public Error {
 public:
  using Error::Error;
};

}  // namespace rnf
