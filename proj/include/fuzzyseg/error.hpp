#pragma once

#include <stdexcept>
#include <string>

namespace fuzzyseg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files, bad configuration values, or schema violations.
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace fuzzyseg
