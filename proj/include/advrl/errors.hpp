#pragma once

#include <stdexcept>
#include <string>

namespace advrl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad shapes, out-of-range indices, malformed arguments.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A non-finite value appeared where the math requires finite numbers.
class NumericError : public Error {
 public:
  using Error::Error;
};

// An operation was called out of order (step after terminal, missing noise sample).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class NotAvailable : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace advrl
