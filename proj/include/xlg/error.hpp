#pragma once

#include <stdexcept>
#include <string>

namespace xlg {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated on-disk data (tensor files, manifests, CSVs).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// An input violated an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace xlg
