#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace critics {

/// Byte range [start, end) of one sentence inside StoryText::body.
struct SentenceSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  int ordinal = 0;

  bool operator==(const SentenceSpan&) const = default;
};

struct StoryText {
  std::string body;
  std::vector<SentenceSpan> sentence_index;

  std::string_view sentence(const SentenceSpan& span) const {
    return std::string_view(body).substr(span.start, span.end - span.start);
  }
  std::size_t sentence_count() const { return sentence_index.size(); }

  bool operator==(const StoryText&) const = default;
};

/// Splits on `.`, `!`, `?` when followed by whitespace and an upper-case
/// letter (optionally behind an opening quote) or by end of text. Closing
/// quotes/brackets directly after the terminator stay with the sentence; a
/// blank line always ends a sentence. "Mr.", "Mrs.", "Dr.", "Ms.", "St.",
/// "vs.", "e.g." and "i.e." never terminate.
/// Throws Error{EmptyText} when `body` has no non-whitespace byte.
StoryText segment_sentences(std::string body);

/// Replaces the bytes of `span` with `replacement` (trimmed). Bytes outside
/// the span are untouched; the index keeps its ordinals, the replaced span
/// covers exactly the replacement and later spans shift by the size delta.
/// Throws Error{SpanNotFound} if `span` is not in the index, Error{EmptyText}
/// if the replacement is blank.
StoryText replace_span(const StoryText& story, const SentenceSpan& span,
                       std::string_view replacement);

void to_json(nlohmann::json& j, const SentenceSpan& s);
void from_json(const nlohmann::json& j, SentenceSpan& s);
void to_json(nlohmann::json& j, const StoryText& t);
void from_json(const nlohmann::json& j, StoryText& t);

}  // namespace critics
