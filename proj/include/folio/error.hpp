#pragma once

#include <stdexcept>
#include <string>

namespace folio {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (bad grid index,
// empty reference sequence, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent file payload.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Synthetic page could not be produced for the requested configuration.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// Inconsistent run configuration (unknown page ids, bad probabilities, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A structural invariant the library guarantees was found broken.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace folio
