#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mapid {

// Malformed expression text. `position` is a byte offset into the input.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t position)
      : std::runtime_error(msg + " (at position " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Raised when evaluating an expression hits 0 raised to a negative power.
// Carries the offending subexpression, already formatted.
class EvalError : public std::runtime_error {
 public:
  explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

// A map iterate left the divergence guard box.
class TrajectoryEscape : public std::runtime_error {
 public:
  TrajectoryEscape(std::size_t step, double value)
      : std::runtime_error("trajectory escaped at step " + std::to_string(step) +
                           " (component " + std::to_string(value) + ")"),
        step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Non-finite value produced inside the network forward pass.
class NumericOverflow : public std::runtime_error {
 public:
  NumericOverflow(int stack, int layer)
      : std::runtime_error("non-finite value in network forward pass (stack " +
                           std::to_string(stack) + ", layer " + std::to_string(layer) + ")"),
        stack_(stack),
        layer_(layer) {}
  int stack() const noexcept { return stack_; }
  int layer() const noexcept { return layer_; }

 private:
  int stack_;
  int layer_;
};

}  // namespace mapid
