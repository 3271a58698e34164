#include "critics/error.hpp"

namespace critics {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingSection: return "MissingSection";
    case ErrorCode::OutlineParseError: return "OutlineParseError";
    case ErrorCode::InvalidPackage: return "InvalidPackage";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::SpanNotFound: return "SpanNotFound";
    case ErrorCode::MissingSlot: return "MissingSlot";
    case ErrorCode::UnknownSlot: return "UnknownSlot";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::ProviderUnreachable: return "ProviderUnreachable";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::MalformedProviderResponse: return "MalformedProviderResponse";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::NoMatcherAccepts: return "NoMatcherAccepts";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::PersonaParseFailure: return "PersonaParseFailure";
    case ErrorCode::CritiqueParseFailure: return "CritiqueParseFailure";
    case ErrorCode::DecisionParseFailure: return "DecisionParseFailure";
    case ErrorCode::RefinementParseFailure: return "RefinementParseFailure";
    case ErrorCode::SuggestionParseFailure: return "SuggestionParseFailure";
    case ErrorCode::VerdictParseFailure: return "VerdictParseFailure";
    case ErrorCode::EmptyCritiqueList: return "EmptyCritiqueList";
    case ErrorCode::NoSentences: return "NoSentences";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::RunAborted: return "RunAborted";
    case ErrorCode::MixedMetricSets: return "MixedMetricSets";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::RaggedMatrix: return "RaggedMatrix";
    case ErrorCode::TooFewRaters: return "TooFewRaters";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::StorageError: return "StorageError";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::IllegalState: return "IllegalState";
    case ErrorCode::UnknownRound: return "UnknownRound";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::RoundIncomplete: return "RoundIncomplete";
    case ErrorCode::UnmarkedRounds: return "UnmarkedRounds";
    case ErrorCode::BindFailure: return "BindFailure";
  }
  return "Unknown";
}

}  // namespace critics
