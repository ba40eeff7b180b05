#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace divctl {

enum class Errc {
  // distribution-core
  AllZero,
  NegativeWeight,
  IndexOutOfRange,
  WeightOutOfRange,
  DuplicateLabel,
  LastLabel,
  EmptyLabel,
  InvalidDistribution,
  InvalidAttribute,
  // prompt-sampler
  InvalidPlan,
  MissingAssignment,
  // model-gateway
  BackendUnavailable,
  Timeout,
  MalformedResponse,
  ParseFailure,
  UnknownLabelSpace,
  // verify-engine
  DimensionMismatch,
  EmptyLabelSet,
  UnknownAttribute,
  NotYetMeasured,
  // diversity-metrics
  EmptySet,
  LengthMismatch,
  InvalidArgument,
  // session-engine
  InvalidCount,
  DuplicateAttribute,
  UnknownIteration,
  UnknownSession,
  UnknownImage,
  CorruptStore,
  // cli-runner
  ScenarioParseError,
  MismatchedScenarios,
  RefusesHttpBackend,
  // api-service
  BindFailure,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::AllZero: return "AllZero";
    case Errc::NegativeWeight: return "NegativeWeight";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::WeightOutOfRange: return "WeightOutOfRange";
    case Errc::DuplicateLabel: return "DuplicateLabel";
    case Errc::LastLabel: return "LastLabel";
    case Errc::EmptyLabel: return "EmptyLabel";
    case Errc::InvalidDistribution: return "InvalidDistribution";
    case Errc::InvalidAttribute: return "InvalidAttribute";
    case Errc::InvalidPlan: return "InvalidPlan";
    case Errc::MissingAssignment: return "MissingAssignment";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::Timeout: return "Timeout";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::ParseFailure: return "ParseFailure";
    case Errc::UnknownLabelSpace: return "UnknownLabelSpace";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyLabelSet: return "EmptyLabelSet";
    case Errc::UnknownAttribute: return "UnknownAttribute";
    case Errc::NotYetMeasured: return "NotYetMeasured";
    case Errc::EmptySet: return "EmptySet";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidCount: return "InvalidCount";
    case Errc::DuplicateAttribute: return "DuplicateAttribute";
    case Errc::UnknownIteration: return "UnknownIteration";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::UnknownImage: return "UnknownImage";
    case Errc::CorruptStore: return "CorruptStore";
    case Errc::ScenarioParseError: return "ScenarioParseError";
    case Errc::MismatchedScenarios: return "MismatchedScenarios";
    case Errc::RefusesHttpBackend: return "RefusesHttpBackend";
    case Errc::BindFailure: return "BindFailure";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

  /// True for failures that originate at a model backend.
  bool is_gateway_failure() const noexcept {
    return code_ == Errc::BackendUnavailable || code_ == Errc::Timeout ||
           code_ == Errc::MalformedResponse;
  }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace divctl
