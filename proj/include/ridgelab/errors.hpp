#pragma once

#include <stdexcept>
#include <string>

namespace ridgelab {

// Precondition or invariant broken by the caller (shape mismatch, id out of range, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite values, solver non-convergence, divergence during training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or config.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define RIDGELAB_REQUIRE(cond, msg)                               \
  do {                                                            \
    if (!(cond)) throw ::ridgelab::ContractViolation(std::string(msg)); \
  } while (0)

}  // namespace ridgelab
