#pragma once

#include <stdexcept>
#include <string>

namespace windtree {

/// Error categories raised across the library. The CLI maps them to exit codes.
enum class ErrorKind {
  DegenerateLattice,
  DegenerateAngle,
  NotAdmissible,
  StartInsideObstacle,
  SameSide,
  DegenerateCase3,
  SlitDoesNotEmbed,
  SingularHit,
  TbeyondTrace,
  SaddleConnectionSuspected,
  DegenerateSlit,
  NonReturningOrbit,
  InductionBlowup,
  InsufficientTime,
  ZeroDirection,
  NotInOEpsilon,
  TooFewPoints,
  InsufficientSpan,
  LevelMismatch,
  ParseError,
  ValidationError,
  IoError,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::DegenerateLattice: return "DegenerateLattice";
    case ErrorKind::DegenerateAngle: return "DegenerateAngle";
    case ErrorKind::NotAdmissible: return "NotAdmissible";
    case ErrorKind::StartInsideObstacle: return "StartInsideObstacle";
    case ErrorKind::SameSide: return "SameSide";
    case ErrorKind::DegenerateCase3: return "DegenerateCase3";
    case ErrorKind::SlitDoesNotEmbed: return "SlitDoesNotEmbed";
    case ErrorKind::SingularHit: return "SingularHit";
    case ErrorKind::TbeyondTrace: return "TbeyondTrace";
    case ErrorKind::SaddleConnectionSuspected: return "SaddleConnectionSuspected";
    case ErrorKind::DegenerateSlit: return "DegenerateSlit";
    case ErrorKind::NonReturningOrbit: return "NonReturningOrbit";
    case ErrorKind::InductionBlowup: return "InductionBlowup";
    case ErrorKind::InsufficientTime: return "InsufficientTime";
    case ErrorKind::ZeroDirection: return "ZeroDirection";
    case ErrorKind::NotInOEpsilon: return "NotInOEpsilon";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::InsufficientSpan: return "InsufficientSpan";
    case ErrorKind::LevelMismatch: return "LevelMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace windtree
