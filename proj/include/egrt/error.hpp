#pragma once

#include <stdexcept>
#include <string>

namespace egrt {

// Precondition violations (bad parameters, malformed inputs) are reported as
// std::invalid_argument. Failures that arise while a valid run executes
// derive from RuntimeError.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A regulator received an observation outside its declared range.
class VarietyError : public RuntimeError {
 public:
  VarietyError(const std::string& msg, long tick = -1)
      : RuntimeError(tick < 0 ? msg : "tick " + std::to_string(tick) + ": " + msg), tick_(tick) {}
  long tick() const noexcept { return tick_; }

 private:
  long tick_;
};

// A simulated quantity left its admissible range.
class DivergenceError : public RuntimeError {
 public:
  DivergenceError(const std::string& msg, long tick)
      : RuntimeError("diverged at tick " + std::to_string(tick) + ": " + msg), tick_(tick) {}
  long tick() const noexcept { return tick_; }

 private:
  long tick_;
};

}  // namespace egrt
