#pragma once

#include <stdexcept>
#include <string>

namespace memctl {

/// Rejected input: a precondition of an operation does not hold.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (instability, non-convergence, non-finite values).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computed result violates a property it is required to satisfy.
class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace memctl
