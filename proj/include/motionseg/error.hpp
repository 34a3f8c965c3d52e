#pragma once

#include <stdexcept>
#include <string>

namespace motionseg {

enum class ErrorCode {
  BadMagic,
  TruncatedFile,
  NonFinite,
  IoError,
  UnsupportedDepth,
  TooManyInstances,
  DegenerateImage,
  DimensionMismatch,
  TooFewPoints,
  EmptyRegion,
  MissingPair,
  InvalidArgument,
  BadConfig,
};

const char* to_string(ErrorCode code);

// All library failures surface as this exception; code() carries the
// category so callers (CLI exit codes, bindings) can map it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace motionseg
