#pragma once

#include <stdexcept>
#include <string>

namespace deffx {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad shapes, out-of-range parameters, mismatched arities.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A metric whose normalizer vanishes (e.g. ESR of a silent target).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

// NaN or infinity where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration document. `pointer` is a JSON pointer to the
// offending field ("/model/blocks").
class ConfigError : public Error {
 public:
  ConfigError(std::string pointer, const std::string& message)
      : Error(pointer + ": " + message), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace deffx
