#pragma once

#include <string>
#include <stdexcept>
#include <string_view>

namespace critics {

enum class ErrorCode {
  // story model
  MissingSection,
  OutlineParseError,
  InvalidPackage,
  EmptyText,
  SpanNotFound,
  // llm gateway
  MissingSlot,
  UnknownSlot,
  UnknownTemplate,
  ProviderUnreachable,
  RateLimited,
  MalformedProviderResponse,
  Timeout,
  ScriptExhausted,
  NoMatcherAccepts,
  InvalidRequest,
  // engines
  PersonaParseFailure,
  CritiqueParseFailure,
  DecisionParseFailure,
  RefinementParseFailure,
  SuggestionParseFailure,
  VerdictParseFailure,
  EmptyCritiqueList,
  NoSentences,
  InvalidConfig,
  RunAborted,
  // evaluation
  MixedMetricSets,
  EmptyInput,
  LengthMismatch,
  RaggedMatrix,
  TooFewRaters,
  // session service
  ValidationError,
  StorageError,
  NotFound,
  Conflict,
  IllegalState,
  UnknownRound,
  IndexOutOfRange,
  RoundIncomplete,
  UnmarkedRounds,
  // cli
  BindFailure,
};

std::string_view to_string(ErrorCode code);

/// All library failures are reported as `Error`; `code()` is the stable,
/// machine-readable part and is what the HTTP layer serializes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace critics
