#include <doctest.h>

#include "../support/generators.hpp"
#include "critics/error.hpp"
#include "critics/sentences.hpp"

using namespace critics;

namespace {

std::vector<std::string> sentences_of(const StoryText& t) {
  std::vector<std::string> out;
  for (const auto& s : t.sentence_index) out.emplace_back(t.sentence(s));
  return out;
}

}  // namespace

TEST_CASE("minimal terminators split") {
  auto t = segment_sentences("A. B? C!");
  REQUIRE(t.sentence_count() == 3);
  for (int i = 0; i < 3; ++i) CHECK(t.sentence_index[i].ordinal == i);
  CHECK(sentences_of(t) == std::vector<std::string>{"A.", "B?", "C!"});
}

TEST_CASE("quoted terminators stay inside their sentence") {
  auto t = segment_sentences("\"But... why me?\" she managed to stammer.");
  CHECK(t.sentence_count() == 1);
  auto u = segment_sentences("He said, \"Go home.\" Then he left.");
  CHECK(sentences_of(u) == std::vector<std::string>{"He said, \"Go home.\"", "Then he left."});
  auto curly = segment_sentences("\xE2\x80\x9CRun!\xE2\x80\x9D The door slammed.");
  CHECK(sentences_of(curly) ==
        std::vector<std::string>{"\xE2\x80\x9CRun!\xE2\x80\x9D", "The door slammed."});
}

TEST_CASE("abbreviations never terminate") {
  auto t = segment_sentences("Mr. Smith met Dr. Jones on St. Mark's. They talked, e.g. About rain.");
  CHECK(sentences_of(t) ==
        std::vector<std::string>{"Mr. Smith met Dr. Jones on St. Mark's.", "They talked, e.g. About rain."});
}

TEST_CASE("blank lines end sentences and lower-case continuations do not split") {
  auto t = segment_sentences("A heading\n\nIt was late. the clock said so.");
  CHECK(sentences_of(t) == std::vector<std::string>{"A heading", "It was late. the clock said so."});
}

TEST_CASE("empty bodies are rejected") {
  CHECK_THROWS_AS(segment_sentences("  \n\t"), Error);
}

TEST_CASE("spans and gaps reproduce the body") {
  auto body = std::string("  One here.  Two there!\nThree?  ");
  auto t = segment_sentences(body);
  std::string rebuilt;
  std::size_t pos = 0;
  int expected = 0;
  for (const auto& s : t.sentence_index) {
    CHECK(s.start < s.end);
    CHECK(s.start >= pos);
    CHECK(s.ordinal == expected++);
    rebuilt += body.substr(pos, s.start - pos) + body.substr(s.start, s.end - s.start);
    pos = s.end;
  }
  rebuilt += body.substr(pos);
  CHECK(rebuilt == body);
}

TEST_CASE("replacing a sentence leaves every other byte alone") {
  auto t = segment_sentences("Jonathan raised an eyebrow. The room was quiet.");
  auto out = replace_span(t, t.sentence_index[0], "Jonathan arched an incredulous eyebrow.");
  CHECK(out.body == "Jonathan arched an incredulous eyebrow. The room was quiet.");
  CHECK(out.sentence(out.sentence_index[0]) == "Jonathan arched an incredulous eyebrow.");
  CHECK(out.sentence(out.sentence_index[1]) == "The room was quiet.");

  auto same = replace_span(t, t.sentence_index[1], "The room was quiet.");
  CHECK(same == t);

  SentenceSpan bogus{1, 3, 0};
  CHECK_THROWS_AS(replace_span(t, bogus, "x"), Error);
  CHECK_THROWS_AS(replace_span(t, t.sentence_index[0], "   "), Error);
}

TEST_CASE("random concatenations segment into their construction count") {
  const std::vector<std::string> pool = {
      "The wind rose.", "Did she hear it?", "Run!", "Mr. Hale waited by the gate.",
      "\"Not again,\" he said.", "\"Why now?\" she asked.", "It was, e.g. a test of nerve.",
      "Nobody answered.", "The bells rang out over St. Agnes.", "\xE2\x80\x9CStay,\xE2\x80\x9D she said."};
  testgen::Rand r(7);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 1 + r.below(12);
    std::vector<std::string> chosen;
    std::string body;
    for (int i = 0; i < n; ++i) {
      chosen.push_back(pool[r.below(static_cast<int>(pool.size()))]);
      if (i) body += r.below(4) == 0 ? "\n" : (r.coin() ? " " : "  ");
      body += chosen.back();
    }
    auto t = segment_sentences(body);
    CAPTURE(body);
    REQUIRE(t.sentence_count() == chosen.size());
    CHECK(sentences_of(t) == chosen);

    // Slice oracle for a random replacement.
    auto k = static_cast<std::size_t>(r.below(n));
    auto span = t.sentence_index[k];
    auto out = replace_span(t, span, "A brand new line.");
    CHECK(out.body.substr(0, span.start) == body.substr(0, span.start));
    CHECK(out.body.substr(span.start + std::string("A brand new line.").size()) == body.substr(span.end));
    CHECK(out.sentence(out.sentence_index[k]) == "A brand new line.");
  }
}

TEST_CASE("story text json round-trips") {
  auto t = segment_sentences("One. Two.");
  nlohmann::json j = t;
  CHECK(j.at("sentences").size() == 2);
  CHECK(j.get<StoryText>() == t);
  CHECK(nlohmann::json{{"body", "One. Two."}}.get<StoryText>() == t);
}
