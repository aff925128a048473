#pragma once

#include <stdexcept>
#include <string>

namespace ellitrack {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated (dimension mismatch, empty input, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A numeric parameter lies outside its mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written or decoded. The message names the file.
class IoError : public Error {
 public:
  using Error::Error;
};

/// An assignment problem has no complete matching avoiding forbidden entries.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Level-set evolution produced a non-finite value.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration; the message names the offending key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ellitrack
