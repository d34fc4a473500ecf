#pragma once

#include <stdexcept>
#include <string>

namespace nclp {

/// Shape or layout mismatch between an operator and its algebra, or a
/// malformed instance.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation (p < 1,
/// non-Hermitian input to the functional calculus, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative solver failed in a way that leaves no usable iterate.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nclp
