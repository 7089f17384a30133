#include "fwbic/errors.hpp"

namespace fwbic {

const char *to_string(ErrorKind k) {
  switch (k) {
  case ErrorKind::ConfigError: return "ConfigError";
  case ErrorKind::ClearZoneViolation: return "ClearZoneViolation";
  case ErrorKind::MultiModeBand: return "MultiModeBand";
  case ErrorKind::BadIndexBounds: return "BadIndexBounds";
  case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
  case ErrorKind::SnapFailure: return "SnapFailure";
  case ErrorKind::NoConvergence: return "NoConvergence";
  case ErrorKind::AmbiguousAssignment: return "AmbiguousAssignment";
  case ErrorKind::BandViolation: return "BandViolation";
  case ErrorKind::NearZeroCoupling: return "NearZeroCoupling";
  case ErrorKind::IllConditioned: return "IllConditioned";
  case ErrorKind::NoRootInBand: return "NoRootInBand";
  case ErrorKind::NoCrossing: return "NoCrossing";
  case ErrorKind::NoSignChange: return "NoSignChange";
  case ErrorKind::ParityViolation: return "ParityViolation";
  case ErrorKind::EscapedBand: return "EscapedBand";
  case ErrorKind::BranchJump: return "BranchJump";
  case ErrorKind::ValidationFailure: return "ValidationFailure";
  }
  return "Unknown";
}

int exit_code_for(ErrorKind k) {
  switch (k) {
  case ErrorKind::ConfigError:
    return 4;
  case ErrorKind::ClearZoneViolation:
  case ErrorKind::MultiModeBand:
  case ErrorKind::BadIndexBounds:
  case ErrorKind::DegenerateGeometry:
  case ErrorKind::ValidationFailure:
    return 2;
  default:
    return 3;
  }
}

} // namespace fwbic
