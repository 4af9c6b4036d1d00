#pragma once

#include <stdexcept>
#include <string>

namespace dpre {

// Base of everything the library throws on a contract violation.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Access to an environment site outside the declared space-time window.
class WindowViolation : public Error {
 public:
  using Error::Error;
};

// A computation would exceed a configured memory or size cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

// Raised when the empirical Jensen ordering between mean log W and
// log mean W^theta fails on a Monte Carlo batch.
class JensenViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace dpre
