#pragma once

#include <stdexcept>
#include <string>

namespace trustbal {

// Input file or schema problem (bad header, bad cell, bad year sequence).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string msg, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + msg
                                : std::move(msg)),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Numerical failure inside a sampler, factorization or fit.
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Cholesky factorization hit a nonpositive pivot; carries its index.
class NotPositiveDefinite : public NumericError {
 public:
  explicit NotPositiveDefinite(int pivot)
      : NumericError("matrix not positive definite (leading minor at pivot " +
                     std::to_string(pivot) + ")"),
        pivot_(pivot) {}
  int pivot() const noexcept { return pivot_; }

 private:
  int pivot_;
};

}  // namespace trustbal
