#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vlscene {

enum class ErrorCode {
  ZeroVector,
  DimMismatch,
  EmptyInput,
  InvalidTau,
  InvalidShape,
  NonFinite,
  TokenOutOfRange,
  ConfigInvalid,
  EmptyBatch,
  UnknownLabel,
  DegenerateK,
  MissingMask,
  DatasetMismatch,
  SeparationFailure,
  IoError,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  TrailingData,
  MetaParseError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vlscene
