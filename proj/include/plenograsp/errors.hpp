#pragma once

#include <stdexcept>
#include <string>

namespace plenograsp {

// Bad inputs: malformed files, violated invariants, impossible parameters.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures while computing on valid inputs (divergence, degenerate evidence).
// The CLI maps this to exit code 2.
class ComputeError : public std::runtime_error {
 public:
  explicit ComputeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace plenograsp
