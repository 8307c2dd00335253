#include "rsvl/error.hpp"

namespace rsvl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::Io: return "Io";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NaNScore: return "NaNScore";
    case ErrorCode::KOutOfRange: return "KOutOfRange";
    case ErrorCode::BadTemplate: return "BadTemplate";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::NoWindows: return "NoWindows";
    case ErrorCode::WeightSumInvalid: return "WeightSumInvalid";
    case ErrorCode::InvalidRegion: return "InvalidRegion";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::InsufficientShots: return "InsufficientShots";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::EndpointDown: return "EndpointDown";
    case ErrorCode::RequestRejected: return "RequestRejected";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

}  // namespace rsvl
