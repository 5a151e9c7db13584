#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metarisk {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scalar argument lies outside the domain an operation is defined on
/// (negative decay exponent, |beta| >= 1/lambda_1, ...).
class ParameterDomainError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

/// A precondition of the excess-risk bounds does not hold. The message names
/// the violated inequality.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incomplete configuration / plan input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The SGD iterate became non-finite or exceeded the divergence guard.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : Error(what), iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace metarisk
