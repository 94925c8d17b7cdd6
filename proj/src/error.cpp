#include "mcpose/error.hpp"

namespace mcpose {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonOrthonormalInput: return "NonOrthonormalInput";
    case ErrorCode::GimbalProximity: return "GimbalProximity";
    case ErrorCode::InvalidCameraIndex: return "InvalidCameraIndex";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::CoincidentCenters: return "CoincidentCenters";
    case ErrorCode::DegenerateLine: return "DegenerateLine";
    case ErrorCode::ParallelRays: return "ParallelRays";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::SingularInnovationCovariance: return "SingularInnovationCovariance";
    case ErrorCode::WrongCameraCount: return "WrongCameraCount";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::MissingCamera: return "MissingCamera";
    case ErrorCode::InsufficientMatches: return "InsufficientMatches";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::InsufficientFeatures: return "InsufficientFeatures";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_input_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
    case ErrorCode::LengthMismatch:
    case ErrorCode::InvalidCameraIndex:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace mcpose
