#pragma once

#include <stdexcept>
#include <string>

namespace gfar {

// Bad input: malformed file, inconsistent dimensions, invalid option.
// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical breakdown: failed factorization, non-finite iterate.
// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

class NotPositiveDefiniteError : public NumericalError {
 public:
  NotPositiveDefiniteError(int pivot_index, const std::string& what)
      : NumericalError(what), pivot_(pivot_index) {}

  // Index of the offending pivot in the original (unpermuted) ordering,
  // or -1 when the factorization backend did not identify one.
  int pivot_index() const { return pivot_; }

 private:
  int pivot_;
};

}  // namespace gfar
