#pragma once

#include <stdexcept>
#include <string>

namespace decnn {

/// An attribute or address lies outside its admissible range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed text input (IP text, amat rows, config values).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated binary container.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (e.g. selecting on unevaluated individuals).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Fitness evaluation failed; the message carries the candidate context.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace decnn
