#pragma once

#include <stdexcept>
#include <string>

namespace mftg {

// Thrown when a mathematical contract is broken (mass not summing to one,
// inadmissible action law, kernel row off the enumerated space, ...).
// The CLI maps this to exit code 2.
struct InvariantViolation : std::runtime_error {
  explicit InvariantViolation(const std::string& what) : std::runtime_error(what) {}
};

// Bad arguments, unreadable files, malformed configs. CLI exit code 1.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mftg
