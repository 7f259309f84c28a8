#pragma once

#include <stdexcept>
#include <string>

namespace closedloop {

enum class ErrorCode {
  NonFiniteField,
  NonFiniteIntegrand,
  EmptyWindow,
  NonPositiveValue,
  ToleranceNotReached,
  BracketInvalid,
  IncompatibleVariants,
  DegenerateMetric,
  NoProbes,
  ForwardUnavailable,
  ModulusGapViolated,
  TargetUnreachable,
  MaxIterExceeded,
  NoContraction,
  TooFewIterates,
  StepTooLarge,
  DomainViolation,
  EquilibriumMismatch,
  NonSmoothA,
  PotentialUnavailable,
  ConditionViolated,
  SamePoint,
  DimensionMismatch,
  NoConvergence,
  EqualMeasures,
  SchemaError,
  ConstraintError,
  IoError,
};

const char* error_code_name(ErrorCode code);

/// Library-wide exception: a spec'd error condition plus a human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteField: return "NonFiniteField";
    case ErrorCode::NonFiniteIntegrand: return "NonFiniteIntegrand";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::ToleranceNotReached: return "ToleranceNotReached";
    case ErrorCode::BracketInvalid: return "BracketInvalid";
    case ErrorCode::IncompatibleVariants: return "IncompatibleVariants";
    case ErrorCode::DegenerateMetric: return "DegenerateMetric";
    case ErrorCode::NoProbes: return "NoProbes";
    case ErrorCode::ForwardUnavailable: return "ForwardUnavailable";
    case ErrorCode::ModulusGapViolated: return "ModulusGapViolated";
    case ErrorCode::TargetUnreachable: return "TargetUnreachable";
    case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::NoContraction: return "NoContraction";
    case ErrorCode::TooFewIterates: return "TooFewIterates";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::EquilibriumMismatch: return "EquilibriumMismatch";
    case ErrorCode::NonSmoothA: return "NonSmoothA";
    case ErrorCode::PotentialUnavailable: return "PotentialUnavailable";
    case ErrorCode::ConditionViolated: return "ConditionViolated";
    case ErrorCode::SamePoint: return "SamePoint";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::EqualMeasures: return "EqualMeasures";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ConstraintError: return "ConstraintError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace closedloop
