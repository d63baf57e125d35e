#include "vlscene/error.hpp"

namespace vlscene {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidTau: return "InvalidTau";
    case ErrorCode::InvalidShape: return "InvalidShape";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::TokenOutOfRange: return "TokenOutOfRange";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::DegenerateK: return "DegenerateK";
    case ErrorCode::MissingMask: return "MissingMask";
    case ErrorCode::DatasetMismatch: return "DatasetMismatch";
    case ErrorCode::SeparationFailure: return "SeparationFailure";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::TrailingData: return "TrailingData";
    case ErrorCode::MetaParseError: return "MetaParseError";
  }
  return "Unknown";
}

}  // namespace vlscene
