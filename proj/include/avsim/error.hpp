#pragma once

#include <stdexcept>
#include <string>

namespace avsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Structurally valid input that violates a domain invariant. `element()` names
/// the offending id (node, edge, route, vehicle, ...), empty when not applicable.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& message, std::string element = {})
      : Error(element.empty() ? message : message + " '" + element + "'"),
        element_(std::move(element)) {}

  const std::string& element() const noexcept { return element_; }

 private:
  std::string element_;
};

/// A world point is farther from the route centerline than the allowed offset.
class OffRoadError : public Error {
 public:
  using Error::Error;
};

/// Car-following evaluated with a non-positive bumper gap.
class DegenerateGapError : public Error {
 public:
  using Error::Error;
};

/// Environment methods called out of order (step before reset, step after termination).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace avsim
