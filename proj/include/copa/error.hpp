#pragma once

#include <stdexcept>
#include <string>

namespace copa {

enum class ErrorCode {
  // geometry
  EmptyCloud,
  BehindCamera,
  DegenerateInput,
  // part modeling
  DegenerateMask,
  NoDepth,
  TooFewPoints,
  NoConsensus,
  // constraint language
  UnrecognizedTemplate,
  BadUnit,
  UnknownLabel,
  KindMismatch,
  // solver
  UnresolvedReference,
  // grasping
  EmptyCandidates,
  NoCandidateInMask,
  // oracle
  ScriptMiss,
  InvalidSelection,
  DuplicateKey,
  // files and schemas
  SchemaError,
  IoError,
  // pipeline
  InvalidScene,
  GraspFailure,
  ConstraintParseFailure,
  SolveFailure,
};

const char* error_code_name(ErrorCode code);

/// Typed error carried by every failure path in the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace copa
