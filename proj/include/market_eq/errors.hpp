#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace market_eq {

// Index arrays that do not describe a valid matrix, or arrays whose lengths
// disagree with each other.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data that is well formed but violates a model invariant (negative
// utility, nonpositive budget, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::int64_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::int64_t line() const { return line_; }

 private:
  std::int64_t line_;
};

// Raised when an internal numerical routine breaks its own contract, e.g. a
// bracketing search that fails to shrink. Indicates a bug, not bad input.
class NumericalFault : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace market_eq
