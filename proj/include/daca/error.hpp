#pragma once

#include <stdexcept>
#include <string>

namespace daca {

// Base for every error raised by the library. The CLI maps ValidationError
// to exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files, invariant violations, bad wiring.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (empty request, empty input...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Missing auth env var, live interlock not satisfied, unknown profile ids.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Anything that went wrong talking to a backend or target.
class BackendError : public Error {
 public:
  using Error::Error;
};

class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

}  // namespace daca
