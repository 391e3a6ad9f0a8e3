#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace planefield {

/// Thrown when a caller breaks an operation's preconditions (bad shapes,
/// out-of-range arguments, malformed configuration).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a computation produces NaN/Inf.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Collects every problem found while validating an input directory.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { Io, Version, Truncated, Checksum, Format };
  CheckpointError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace planefield
