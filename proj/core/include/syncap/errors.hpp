#pragma once

#include <stdexcept>
#include <string>

namespace syncap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Token and tag sequences of different lengths.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Raised when an operation receives an empty input it cannot reduce over
/// (zero attention regions, zero-length sentence, zero evaluation scenes).
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during training.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class NotApplicableError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace syncap
