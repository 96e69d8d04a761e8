#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ddr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad shapes, out-of-range arguments, non-orthonormal projections.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration (e.g. pca-linear init without a linear block).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An operation was called before its inputs were produced.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Integration produced non-finite values.
class NumericalBlowup : public Error {
 public:
  NumericalBlowup(std::size_t sample, std::size_t step, const std::string& what)
      : Error(what + " (sample " + std::to_string(sample) + ", step " +
              std::to_string(step) + ")"),
        sample_(sample),
        step_(step) {}

  std::size_t sample() const noexcept { return sample_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t sample_;
  std::size_t step_;
};

/// Malformed text input. Row and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::size_t col, const std::string& what)
      : Error(format(row, col, what)), row_(row), col_(col) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  static std::string format(std::size_t row, std::size_t col, const std::string& what) {
    std::string loc;
    if (row > 0) loc += "row " + std::to_string(row);
    if (col > 0) loc += (loc.empty() ? "" : ", ") + std::string("column ") + std::to_string(col);
    return loc.empty() ? what : what + " (" + loc + ")";
  }

  std::size_t row_;
  std::size_t col_;
};

}  // namespace ddr
