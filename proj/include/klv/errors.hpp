#pragma once

#include <stdexcept>
#include <string>

namespace klv {

/// Operands whose dimension or truncation disagree, or malformed structure.
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation
/// (e.g. log of a tensor whose constant term is not 1).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// An algebraic self-check failed; signals a bug rather than bad input.
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite state encountered while integrating a flow.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input file; the message carries the location.
class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Full tree enumeration refused because it exceeds the configured leaf cap.
class LeafCapExceeded : public std::runtime_error {
public:
    LeafCapExceeded(double required, double cap)
        : std::runtime_error("cubature tree needs " + std::to_string(static_cast<long double>(required)) +
                             " leaves, cap is " + std::to_string(static_cast<long double>(cap)) +
                             "; raise the cap or use sampled mode"),
          required_leaves(required) {}
    double required_leaves;
};

}  // namespace klv
