#pragma once

#include <stdexcept>
#include <string>

namespace unmt {

// Base of every error thrown by the toolkit. Subclasses name the contract
// that was violated so callers and tests can tell them apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class ParameterError : public Error { using Error::Error; };
class InputError : public Error { using Error::Error; };
class StateError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class LookupError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class EvaluationError : public Error { using Error::Error; };
class VersionError : public Error { using Error::Error; };

}  // namespace unmt
