#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace charflow {

enum class ErrorCode {
  NonIntegerLambda,
  NegativeLambda,
  DomainTooSmall,
  GridTooCoarse,
  NonFiniteDerivative,
  UnboundedInitialSlope,
  InvalidInitialData,
  GridTooLargeForOracle,
  BoundViolated,
  NonFiniteState,
  XiNonPositive,
  TimeStepTooLarge,
  DiagnosticsFailure,
  SampleOutsideDomain,
  InsufficientSamples,
  NoCuspDetected,
  SupportExceedsWindow,
  UnknownFlag,
  ConflictingOptions,
  MissingScenario,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonIntegerLambda: return "NonIntegerLambda";
    case ErrorCode::NegativeLambda: return "NegativeLambda";
    case ErrorCode::DomainTooSmall: return "DomainTooSmall";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::NonFiniteDerivative: return "NonFiniteDerivative";
    case ErrorCode::UnboundedInitialSlope: return "UnboundedInitialSlope";
    case ErrorCode::InvalidInitialData: return "InvalidInitialData";
    case ErrorCode::GridTooLargeForOracle: return "GridTooLargeForOracle";
    case ErrorCode::BoundViolated: return "BoundViolated";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::XiNonPositive: return "XiNonPositive";
    case ErrorCode::TimeStepTooLarge: return "TimeStepTooLarge";
    case ErrorCode::DiagnosticsFailure: return "DiagnosticsFailure";
    case ErrorCode::SampleOutsideDomain: return "SampleOutsideDomain";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::NoCuspDetected: return "NoCuspDetected";
    case ErrorCode::SupportExceedsWindow: return "SupportExceedsWindow";
    case ErrorCode::UnknownFlag: return "UnknownFlag";
    case ErrorCode::ConflictingOptions: return "ConflictingOptions";
    case ErrorCode::MissingScenario: return "MissingScenario";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Structured failure carrying a stable code. `index()` is the grid node that
/// triggered the failure when one exists, and `hint()` carries a numeric
/// remedy (e.g. a suggested time step) for the errors that have one.
class Error : public std::runtime_error {
 public:
  static constexpr std::ptrdiff_t kNoIndex = -1;

  Error(ErrorCode code, const std::string& message, std::ptrdiff_t index = kNoIndex, double hint = 0.0)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), index_(index), hint_(hint) {}

  ErrorCode code() const noexcept { return code_; }
  std::ptrdiff_t index() const noexcept { return index_; }
  double hint() const noexcept { return hint_; }

 private:
  ErrorCode code_;
  std::ptrdiff_t index_;
  double hint_;
};

}  // namespace charflow
