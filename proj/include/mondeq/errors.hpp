#pragma once

#include <stdexcept>
#include <string>

namespace mondeq {

// Shape or length mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation (m <= 0, bits < 2, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller broke a documented precondition that is checked numerically,
// e.g. a supposedly symmetric matrix that is not.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// An iterative numerical routine failed (eigensolver did not converge,
// singular factorization, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed on-disk data.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mondeq
