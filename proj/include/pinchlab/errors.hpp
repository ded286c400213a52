#pragma once

#include <stdexcept>
#include <string>

namespace pinchlab {

/// Input outside the domain of an operation (indefinite metric, R + rho <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Two inputs that must describe the same geometry disagree (e.g. Riemann vs Ricci).
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The symmetry-reduced operator produced terms outside the reduced ansatz.
class ReductionViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The hypothesis R_min(0) > -rho does not hold for the initial data.
class HypothesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unknown configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pinchlab
