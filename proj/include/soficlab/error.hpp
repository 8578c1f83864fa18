#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace soficlab {

/// Bad input: malformed arguments, violated preconditions, mixed-group operands.
class argument_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The operation is not defined for this kind of group, measure or window.
class unsupported_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A search or enumeration budget was exhausted.
///
/// `partial` is set when the caller may still inspect an incomplete result;
/// `bound` carries an upper bound when one is known (greedy set cover,
/// greedy assignment entropy).
class resource_error : public std::runtime_error {
 public:
  explicit resource_error(const std::string& what, bool partial = false,
                          std::optional<double> bound = std::nullopt)
      : std::runtime_error(what), partial_(partial), bound_(bound) {}

  bool partial() const noexcept { return partial_; }
  const std::optional<double>& bound() const noexcept { return bound_; }

 private:
  bool partial_;
  std::optional<double> bound_;
};

}  // namespace soficlab
