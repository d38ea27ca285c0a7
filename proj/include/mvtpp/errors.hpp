#pragma once

#include <stdexcept>
#include <string>

namespace mvtpp {

// Bad input data or contract violation; maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content; carries the 1-based line number.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : ValidationError("line " + std::to_string(line) + ": " + msg), line_number(line) {}
  std::size_t line_number;
};

// Non-finite values, divergence, runaway simulations; CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mvtpp
