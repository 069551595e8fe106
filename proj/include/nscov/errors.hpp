#pragma once

#include <stdexcept>
#include <string>

namespace nscov {

// Bad caller input: wrong sizes, out-of-range configuration values.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Input outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Operation not defined for the given variant (e.g. gradient of a step function).
struct UnsupportedError : std::logic_error {
  using std::logic_error::logic_error;
};

// Malformed or inconsistent data files.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Factorization failures, non-finite densities, broken sampler invariants.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace nscov
