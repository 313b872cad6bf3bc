#pragma once

#include <stdexcept>
#include <string>

namespace stgp {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, inconsistent configuration, violated preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

class NonTriangleFaceError : public InputError {
 public:
  using InputError::InputError;
};

class DegenerateFaceError : public InputError {
 public:
  using InputError::InputError;
};

class DisconnectedMeshError : public InputError {
 public:
  using InputError::InputError;
};

/// Factorization failure, instability, or negative variance beyond round-off.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace stgp
