#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ksmooth {

enum class ErrorCode {
  InvalidParametrization,
  DimensionMismatch,
  SingularBandwidth,
  SingularBlock,
  NoResponseColumn,
  IncompatibleSplit,
  NonpositiveValue,
  UnsupportedDimension,
  Degenerate,
  InsufficientData,
  MissingColumn,
  EmptyAfterFiltering,
  ParseError,
  InvalidConfig,
  IoError,
};

/// Stable identifier used in machine-readable error output.
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ksmooth
