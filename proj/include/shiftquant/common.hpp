#pragma once

#include <stdexcept>
#include <string>

namespace shiftquant {

// Invalid user input: malformed specs, shape mismatches, unparseable files.
// CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: singular or ill-conditioned systems, diverged training.
// CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  enum class Kind { Singular, IllConditioned, Diverged, Inconsistent };

  NumericalError(Kind kind, const std::string& what, double condition_number = 0.0)
      : std::runtime_error(what), kind_(kind), condition_number_(condition_number) {}

  Kind kind() const { return kind_; }
  double condition_number() const { return condition_number_; }

 private:
  Kind kind_;
  double condition_number_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace shiftquant
