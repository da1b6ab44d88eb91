#pragma once

#include <stdexcept>
#include <string>

namespace ego3d {

enum class ErrorCode {
  NonPositiveDepth,
  DegenerateConfiguration,
  DegenerateInput,
  DegenerateRotation,
  DegenerateGeometry,
  InsufficientViews,
  NoConsensus,
  InvalidJoint,
  ShapeMismatch,
  NonFiniteLoss,
  OutOfRange,
  EmptyHeatmap,
  SingularInnovation,
  EmptyBbox,
  EmptySequence,
  EmptySet,
  InvalidConfig,
  MissingInput,
  ParseError,
};

const char* error_code_name(ErrorCode code);

/// Library-wide exception. The code identifies the failure class so callers
/// (and the CLI) can react without parsing the message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::DegenerateRotation: return "DegenerateRotation";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::InsufficientViews: return "InsufficientViews";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::InvalidJoint: return "InvalidJoint";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::EmptyHeatmap: return "EmptyHeatmap";
    case ErrorCode::SingularInnovation: return "SingularInnovation";
    case ErrorCode::EmptyBbox: return "EmptyBbox";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "UnknownError";
}

}  // namespace ego3d
