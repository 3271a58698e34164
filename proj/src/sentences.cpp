#include "critics/sentences.hpp"

#include <array>
#include <cctype>
#include <optional>

#include "critics/error.hpp"
#include "critics/text_util.hpp"

namespace critics {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

// Length of a closing quote/bracket at `pos` (UTF-8 curly quotes are 3 bytes).
std::size_t closer_at(std::string_view s, std::size_t pos) {
  if (pos >= s.size()) return 0;
  char c = s[pos];
  if (c == '"' || c == '\'' || c == ')' || c == ']') return 1;
  if (s.substr(pos, 3) == "\xE2\x80\x9D" || s.substr(pos, 3) == "\xE2\x80\x99") return 3;
  return 0;
}

std::size_t opener_at(std::string_view s, std::size_t pos) {
  if (pos >= s.size()) return 0;
  char c = s[pos];
  if (c == '"' || c == '\'' || c == '(' || c == '[') return 1;
  if (s.substr(pos, 3) == "\xE2\x80\x9C" || s.substr(pos, 3) == "\xE2\x80\x98") return 3;
  return 0;
}

bool ends_with_abbreviation(std::string_view s, std::size_t dot_pos) {
  static constexpr std::array<std::string_view, 8> kAbbrev = {
      "Mr.", "Mrs.", "Dr.", "Ms.", "St.", "vs.", "e.g.", "i.e."};
  std::string_view head = s.substr(0, dot_pos + 1);
  for (auto abbr : kAbbrev) {
    if (head.size() < abbr.size()) continue;
    auto tail = head.substr(head.size() - abbr.size());
    if (!text::iequals(tail, abbr)) continue;
    auto before = head.size() - abbr.size();
    if (before == 0 || !std::isalpha(static_cast<unsigned char>(s[before - 1]))) return true;
  }
  return false;
}

// True when a blank line (two newlines with only spaces between) starts at `pos`.
bool paragraph_break(std::string_view s, std::size_t pos, std::size_t& after) {
  std::size_t newlines = 0;
  std::size_t i = pos;
  while (i < s.size() && is_space(s[i])) {
    if (s[i] == '\n') ++newlines;
    ++i;
  }
  after = i;
  return newlines >= 2;
}

}  // namespace

StoryText segment_sentences(std::string body) {
  StoryText story;
  story.body = std::move(body);
  std::string_view s = story.body;

  std::size_t i = 0;
  while (i < s.size() && is_space(s[i])) ++i;
  if (i == s.size()) throw Error(ErrorCode::EmptyText, "text is empty");

  std::optional<std::size_t> start = i;
  int ordinal = 0;
  auto close = [&](std::size_t end) {
    story.sentence_index.push_back({*start, end, ordinal++});
    start.reset();
  };

  while (i < s.size()) {
    if (!start) {
      if (is_space(s[i])) {
        ++i;
        continue;
      }
      start = i;
    }
    char c = s[i];
    if (is_terminator(c)) {
      std::size_t j = i + 1;
      while (j < s.size() && is_terminator(s[j])) ++j;
      while (auto n = closer_at(s, j)) j += n;
      if (c == '.' && j == i + 1 && ends_with_abbreviation(s, i)) {
        i = j;
        continue;
      }
      std::size_t k = j;
      while (k < s.size() && is_space(s[k])) ++k;
      if (k == s.size()) {
        close(j);
        i = k;
        continue;
      }
      if (k > j) {
        std::size_t letter = k + opener_at(s, k);
        if (letter < s.size() && std::isupper(static_cast<unsigned char>(s[letter]))) {
          close(j);
          i = k;
          continue;
        }
      }
      i = j;
      continue;
    }
    if (c == '\n') {
      std::size_t after = 0;
      if (paragraph_break(s, i, after)) {
        std::size_t end = i;
        while (end > *start && is_space(s[end - 1])) --end;
        close(end);
        i = after;
        continue;
      }
    }
    ++i;
  }
  if (start) {
    std::size_t end = s.size();
    while (end > *start && is_space(s[end - 1])) --end;
    if (end > *start) close(end);
  }
  return story;
}

StoryText replace_span(const StoryText& story, const SentenceSpan& span,
                       std::string_view replacement) {
  std::size_t pos = story.sentence_index.size();
  for (std::size_t i = 0; i < story.sentence_index.size(); ++i) {
    if (story.sentence_index[i] == span) {
      pos = i;
      break;
    }
  }
  if (pos == story.sentence_index.size()) {
    throw Error(ErrorCode::SpanNotFound,
                "span [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                    ") is not a sentence of this story");
  }
  auto text = text::trim(replacement);
  if (text.empty()) throw Error(ErrorCode::EmptyText, "replacement is empty");

  StoryText out;
  out.body.reserve(story.body.size() + text.size());
  out.body.append(story.body, 0, span.start);
  out.body.append(text);
  out.body.append(story.body, span.end, std::string::npos);

  const auto delta = static_cast<std::ptrdiff_t>(text.size()) -
                     static_cast<std::ptrdiff_t>(span.end - span.start);
  out.sentence_index = story.sentence_index;
  out.sentence_index[pos].end = span.start + text.size();
  for (std::size_t i = pos + 1; i < out.sentence_index.size(); ++i) {
    out.sentence_index[i].start = static_cast<std::size_t>(
        static_cast<std::ptrdiff_t>(out.sentence_index[i].start) + delta);
    out.sentence_index[i].end = static_cast<std::size_t>(
        static_cast<std::ptrdiff_t>(out.sentence_index[i].end) + delta);
  }
  return out;
}

void to_json(nlohmann::json& j, const SentenceSpan& s) {
  j = {{"start", s.start}, {"end", s.end}, {"ordinal", s.ordinal}};
}

void from_json(const nlohmann::json& j, SentenceSpan& s) {
  j.at("start").get_to(s.start);
  j.at("end").get_to(s.end);
  j.at("ordinal").get_to(s.ordinal);
}

void to_json(nlohmann::json& j, const StoryText& t) {
  j = {{"body", t.body}, {"sentences", t.sentence_index}};
}

void from_json(const nlohmann::json& j, StoryText& t) {
  j.at("body").get_to(t.body);
  if (auto it = j.find("sentences"); it != j.end()) {
    t.sentence_index = it->get<std::vector<SentenceSpan>>();
  } else {
    t = segment_sentences(t.body);
  }
}

}  // namespace critics
