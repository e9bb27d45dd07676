#pragma once

#include <stdexcept>
#include <string>

namespace concord {

/// Bad input: malformed files, inconsistent dimensions, invalid
/// hyperparameters. The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A computation that could not be completed (factorization failure,
/// non-finite gradient, tail sum that does not settle). Exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// The precision matrix of (B, G) given the variances is singular. This
/// happens when no instrument carries a proper prior on its log area: the
/// shift B + d, G - d leaves the likelihood unchanged.
class IdentifiabilityError : public NumericalError {
 public:
  explicit IdentifiabilityError(const std::string& what) : NumericalError(what) {}
};

}  // namespace concord
