#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace epine {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A precondition or parameter range was violated.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A persisted artifact failed its integrity check.
class ChecksumError : public Error {
 public:
  using Error::Error;
};

/// The exhaustive path oracle exceeded its enumeration budget.
class OracleOverflow : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, double learning_rate,
                   long long step)
      : Error(what + " (learning rate " + std::to_string(learning_rate) +
              ", step " + std::to_string(step) + ")"),
        learning_rate_(learning_rate),
        step_(step) {}
  double learning_rate() const noexcept { return learning_rate_; }
  long long step() const noexcept { return step_; }

 private:
  double learning_rate_;
  long long step_;
};

}  // namespace epine
