#pragma once

#include <stdexcept>
#include <string>

namespace gapforge {

// Precondition or configuration violation.  The CLI maps these to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Failure of the numerics themselves (lost bracket, non-finite sample, ...).
// The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gapforge
