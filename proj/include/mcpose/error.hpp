#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mcpose {

enum class ErrorCode {
  // geometry
  NonOrthonormalInput,
  GimbalProximity,
  InvalidCameraIndex,
  BehindCamera,
  // stereo
  CoincidentCenters,
  DegenerateLine,
  ParallelRays,
  // ekf
  EmptyBatch,
  SingularInnovationCovariance,
  // fusion
  WrongCameraCount,
  IllConditioned,
  MissingCamera,
  // pipeline
  InsufficientMatches,
  Diverged,
  InsufficientFeatures,
  LengthMismatch,
  // input validation and file formats
  InvalidArgument,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// True for codes caused by bad user input (files, flags, configs) rather than
// by the numerics.
bool is_input_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mcpose
