#include "ksmooth/error.hpp"

namespace ksmooth {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParametrization: return "InvalidParametrization";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularBandwidth: return "SingularBandwidth";
    case ErrorCode::SingularBlock: return "SingularBlock";
    case ErrorCode::NoResponseColumn: return "NoResponseColumn";
    case ErrorCode::IncompatibleSplit: return "IncompatibleSplit";
    case ErrorCode::NonpositiveValue: return "NonpositiveValue";
    case ErrorCode::UnsupportedDimension: return "UnsupportedDimension";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::EmptyAfterFiltering: return "EmptyAfterFiltering";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace ksmooth
