#pragma once

#include <stdexcept>
#include <string>

namespace racglab {

// Malformed input or a violated precondition. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configured size or memory cap was hit. The CLI maps this to exit code 3.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace racglab
