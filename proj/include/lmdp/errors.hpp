#pragma once

#include <stdexcept>
#include <string>

namespace lmdp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of inputs do not agree (state/action/feature counts, horizon).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An enumeration, grid or episode budget would exceed its configured cap.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

/// A coverage target cannot be met (rank-deficient features, singular covariates).
class Unsatisfiable : public Error {
 public:
  using Error::Error;
};

}  // namespace lmdp
