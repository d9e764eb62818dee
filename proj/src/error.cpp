#include "segrefine/error.hpp"

namespace segrefine {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::UnknownDtype: return "UnknownDtype";
    case ErrorCode::ShapeOverflow: return "ShapeOverflow";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::MissingRole: return "MissingRole";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::InconsistentClassCount: return "InconsistentClassCount";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::EmptyLayerAxis: return "EmptyLayerAxis";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFiniteEncountered: return "NonFiniteEncountered";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownKey:
    case ErrorCode::ConstraintViolation:
      return ErrorCategory::Config;
    case ErrorCode::NonFiniteEncountered:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Data;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

Error Error::with_stage(std::string stage) const {
  Error tagged(code_, "[" + stage + "] " + detail_);
  tagged.stage_ = std::move(stage);
  return tagged;
}

}  // namespace segrefine
