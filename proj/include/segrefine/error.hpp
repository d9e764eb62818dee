#pragma once

#include <stdexcept>
#include <string>

namespace segrefine {

// Error taxonomy. The category decides the CLI exit code.
enum class ErrorCategory { Config, Data, Numerical };

enum class ErrorCode {
  // tensor io
  BadMagic,
  TruncatedFile,
  UnknownDtype,
  ShapeOverflow,
  IoFailure,
  // bundle
  MissingRole,
  GeometryMismatch,
  InconsistentClassCount,
  // numerics / shapes
  EmptyImage,
  EmptyLayerAxis,
  ShapeMismatch,
  DimensionMismatch,
  InvalidArgument,
  NonFiniteEncountered,
  LabelOutOfRange,
  // config
  UnknownKey,
  ConstraintViolation,
};

const char* to_string(ErrorCode code);
ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }
  ErrorCategory category() const { return category_of(code_); }

  // Message without the code prefix.
  const std::string& detail() const { return detail_; }

  // Stage that raised the error, empty outside the pipeline.
  const std::string& stage() const { return stage_; }

  // Returns a copy tagged with the pipeline stage.
  Error with_stage(std::string stage) const;

 private:
  ErrorCode code_;
  std::string detail_;
  std::string stage_;
};

}  // namespace segrefine
