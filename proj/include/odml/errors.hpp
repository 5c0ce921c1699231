#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace odml {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative eigensolver hit its sweep cap.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

class DimError : public Error {
 public:
  using Error::Error;
};

class DimMismatch : public Error {
 public:
  using Error::Error;
};

// A layer transform was used while older than its metric.
class StaleTransform : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

class SingleClassError : public Error {
 public:
  using Error::Error;
};

class EmptyTrainSet : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class StratificationError : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " +
              std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace odml
