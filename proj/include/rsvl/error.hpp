#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rsvl {

// Every failure raised by the library carries one of these codes so callers
// (and tests) can branch on the kind of failure instead of the message text.
enum class ErrorCode {
  // tensor
  ZeroRow,
  DimMismatch,
  NotNormalized,
  BadMagic,
  TruncatedFile,
  VersionUnsupported,
  Io,
  // training
  ShapeMismatch,
  NonPositiveTemperature,
  StepOutOfRange,
  InvalidConfig,
  // evaluation
  NaNScore,
  KOutOfRange,
  BadTemplate,
  LengthMismatch,
  Empty,
  WindowTooLarge,
  NoWindows,
  WeightSumInvalid,
  InvalidRegion,
  ClassTooSmall,
  InsufficientShots,
  KTooLarge,
  // dataset pipeline
  EndpointDown,
  RequestRejected,
  MalformedResponse,
  DuplicateKey,
  Parse,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rsvl
