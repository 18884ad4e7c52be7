#pragma once

#include <stdexcept>
#include <string>

namespace formatbias {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownFormatError : Error {
  explicit UnknownFormatError(const std::string& id)
      : Error("unknown format id: " + id) {}
};

struct IncompatibleFormatError : Error {
  using Error::Error;
};

struct SchemaError : Error {
  SchemaError(size_t line_no, const std::string& what)
      : Error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
  size_t line;
};

struct DomainError : Error {
  using Error::Error;
};

struct EmptyInputError : Error {
  using Error::Error;
};

struct TooFewFormatsError : Error {
  using Error::Error;
};

struct FamilyMismatchError : Error {
  using Error::Error;
};

struct LengthMismatchError : Error {
  using Error::Error;
};

struct NoRelevantError : Error {
  using Error::Error;
};

struct NoEligibleWindowError : Error {
  using Error::Error;
};

struct InsufficientTrainError : Error {
  using Error::Error;
};

struct ZeroScoreWithoutOverrideError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct TransportError : Error {
  using Error::Error;
};

struct RateLimitedError : Error {
  using Error::Error;
};

struct AuthMissingError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace formatbias
