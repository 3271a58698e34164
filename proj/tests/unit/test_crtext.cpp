#include <doctest.h>

#include "critics/crtext.hpp"
#include "critics/rng.hpp"
#include "../support/fixtures.hpp"
#include "../support/mock.hpp"
#include "../support/text_script.hpp"

using namespace critics;
using llm::MockEntry;
using llm::MockResponse;

namespace {

StoryText ten() { return segment_sentences(read_fixture("story_ten.txt")); }

CrTextConfig quick(int rounds, std::uint64_t seed = 7) {
  CrTextConfig c;
  c.rounds = rounds;
  c.rng_seed = seed;
  return c;
}

const std::string kTarget = "\"I never thought anyone would understand,\" Alex murmured, his voice laced with vulnerability.";

// What changed between input and output, checked byte by byte outside the spans.
std::vector<int> changed_ordinals(const StoryText& in, const StoryText& out) {
  REQUIRE(in.sentence_index.size() == out.sentence_index.size());
  std::vector<int> changed;
  std::size_t prev_in = 0, prev_out = 0;
  for (std::size_t i = 0; i < in.sentence_index.size(); ++i) {
    const auto& a = in.sentence_index[i];
    const auto& b = out.sentence_index[i];
    CHECK(in.body.substr(prev_in, a.start - prev_in) == out.body.substr(prev_out, b.start - prev_out));
    if (in.sentence(a) != out.sentence(b)) changed.push_back(a.ordinal);
    prev_in = a.end;
    prev_out = b.end;
  }
  CHECK(in.body.substr(prev_in) == out.body.substr(prev_out));
  return changed;
}

}  // namespace

TEST_CASE("sampling follows the keyed sentence stream") {
  auto story = ten();
  REQUIRE(story.sentence_count() == 10);
  auto s = sample_sentence(story, 7, 1);
  auto expected = rng::bounded(rng::keyed(7, rng::kSentenceStream + 1), 10);
  CHECK(s == story.sentence_index[expected]);
  CHECK(sample_sentence(story, 7, 1) == s);

  auto one = segment_sentences("Only one sentence here.");
  CHECK(sample_sentence(one, 99, 3).ordinal == one.sentence_index[0].ordinal);
  CHECK(sample_sentence(one, 99, 3, {one.sentence_index[0].ordinal}).ordinal == one.sentence_index[0].ordinal);
}

TEST_CASE("sampling skips revised ordinals until none remain") {
  auto story = ten();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::set<int> revised;
    for (int r = 1; r <= 10; ++r) {
      auto s = sample_sentence(story, seed, r, revised);
      CHECK(!revised.contains(s.ordinal));
      revised.insert(s.ordinal);
    }
    CHECK(revised.size() == 10);
  }
}

TEST_CASE("context window is a verbatim slice clipped at the ends") {
  auto story = ten();
  const auto& idx = story.sentence_index;
  auto ctx = context_window(story, idx[4], 1);
  CHECK(ctx == story.body.substr(idx[3].start, idx[5].end - idx[3].start));
  CHECK(context_window(story, idx[0], 2) == story.body.substr(0, idx[2].end));
  CHECK(context_window(story, idx[9], 0) == std::string(story.sentence(idx[9])));
  CHECK(context_window(story, idx[9], 50) == story.body.substr(idx[0].start, idx[9].end - idx[0].start));
  SentenceSpan foreign{1, 2, 77};
  CHECK(error_code_of([&] { context_window(story, foreign, 1); }) == ErrorCode::SpanNotFound);
}

TEST_CASE("worked voice and image suggestions parse") {
  auto voice = parse_suggestion(
      "1. Original Sentence: \"I never thought anyone would understand\"\n\n"
      "Suggested Revision: \"Never did I reckon anyone would get it, y'know,\" Alex murmured, his voice laced with "
      "vulnerability.\n\n"
      "Reason for Change: This revision incorporates informal language (\"y'know\") and uses \"reckon\" as an "
      "unusual word choice.",
      kTarget, kVoiceCriterion, true);
  CHECK(voice.replacement.find("\"Never did I reckon") == 0);
  CHECK(voice.original == kTarget);
  CHECK(voice.criterion_id == "voice");

  auto image = parse_suggestion(
      "Original Sentence: I never thought anyone would understand\n"
      "Suggested Revision:\n\"I always believed my thoughts were whispers, too faint for anyone to truly hear.\"\n"
      "Reason for Change: This revision incorporates the creativity feature of \"Hear\" by using the metaphor of "
      "whispers.",
      "I never thought anyone would understand.", kImageCriterion, true);
  CHECK(image.replacement == "I always believed my thoughts were whispers, too faint for anyone to truly hear.");
  CHECK(image.reason.find("\"Hear\"") != std::string::npos);
}

TEST_CASE("suggestions must name a feature until the last attempt") {
  auto reply = "Original Sentence: He ran.\nSuggested Revision: He sprinted.\nReason for Change: It is better.";
  CHECK(error_code_of([&] { parse_suggestion(reply, "He ran.", kImageCriterion, true); }) ==
        ErrorCode::SuggestionParseFailure);
  CHECK(parse_suggestion(reply, "He ran.", kImageCriterion, false).replacement == "He sprinted.");
  CHECK(parse_suggestion(reply, "He ran.", "inverted_nonlinear", true).replacement == "He sprinted.");
  CHECK(error_code_of([] { parse_suggestion("I like it as is.", "He ran.", kVoiceCriterion, false); }) ==
        ErrorCode::SuggestionParseFailure);
}

TEST_CASE("a critic that forgets the feature is reminded") {
  MockRig rig({MockEntry::always(MockResponse::reply("Suggested Revision: He sprinted.\nReason: better")),
               MockEntry::always(
                   MockResponse::reply("Suggested Revision: His feet hit the floor.\nReason: adds the Body feature"))});
  TextEngine engine(rig.client, quick(1));
  auto s = engine.image_critique("He ran.", "He ran.");
  CHECK(s.replacement == "His feet hit the floor.");
  auto calls = rig.backend->calls();
  REQUIRE(calls.size() == 2);
  CHECK(calls[1].transcript.find("creativity feature you used") != std::string::npos);
}

TEST_CASE("revision choice parsing") {
  std::vector<RevisionSuggestion> s(2);
  s[0].criterion_id = "image";
  s[0].replacement = "His breath fogged the glass.";
  s[1].criterion_id = "voice";
  s[1].replacement = "Man, it was cold.";
  CHECK(parse_revision_choice("Selected: \"Man, it was cold.\"\nReason: voice", s) == 1);
  CHECK(parse_revision_choice("Selected: the Image refinement\nReason: vivid", s) == 0);
  CHECK(parse_revision_choice("I'd go with \"His breath fogged the glass.\" since it is vivid.", s) == 0);
  CHECK(parse_revision_choice("The voice version feels more alive.", s) == 1);
  CHECK(error_code_of([&] { parse_revision_choice("Both the image and the voice ones are fine.", s); }) ==
        ErrorCode::DecisionParseFailure);
  CHECK(error_code_of([&] { parse_revision_choice("Hard to say.", s); }) == ErrorCode::DecisionParseFailure);
}

TEST_CASE("identical suggestions are resolved without a leader call") {
  MockRig rig(MockRig::silent());
  TextEngine engine(rig.client, quick(1));
  std::vector<RevisionSuggestion> s(2);
  s[0].replacement = s[1].replacement = "Same.";
  CHECK(engine.leader_select_revision(s, "ctx").chosen_index == 0);
  CHECK(rig.backend->calls().empty());
}

TEST_CASE("zero rounds leave the story untouched") {
  MockRig rig(MockRig::silent());
  TextEngine engine(rig.client, quick(0));
  auto r = engine.run(ten());
  CHECK(r.output == ten());
  CHECK(r.rounds.empty());
  CHECK(rig.backend->calls().empty());
}

TEST_CASE("three rounds change exactly three sentences") {
  MockRig rig(scripts::text_run("voice"));
  TextEngine engine(rig.client, quick(3));
  auto in = ten();
  auto r = engine.run(in);
  REQUIRE(r.rounds.size() == 3);
  auto changed = changed_ordinals(in, r.output);
  CHECK(changed.size() == 3);
  std::set<int> targets;
  for (const auto& rec : r.rounds) {
    targets.insert(rec.target.ordinal);
    CHECK(rec.decision.chosen_index == 1);
    CHECK(rec.applied == std::vector<int>{1});
    CHECK(rec.image.replacement.find("[image] ") == 0);
    CHECK(rec.voice.replacement.find("[voice] ") == 0);
    auto idx = static_cast<std::size_t>(rec.target.ordinal - in.sentence_index[0].ordinal);
    CHECK(std::string(r.output.sentence(r.output.sentence_index[idx])) ==
          "[voice] " + std::string(in.sentence(in.sentence_index[idx])));
  }
  CHECK(targets == std::set<int>(changed.begin(), changed.end()));
  // Two critics and a leader per round.
  CHECK(rig.backend->calls().size() == 9);
}

TEST_CASE("critics see the context window around the target") {
  MockRig rig(scripts::text_run("image"));
  auto cfg = quick(1);
  cfg.context_window = 1;
  TextEngine engine(rig.client, cfg);
  auto in = ten();
  auto rec = engine.run_round(in, 1, {});
  auto ctx = context_window(in, rec.target, 1);
  auto calls = rig.backend->calls();
  REQUIRE(calls.size() == 3);
  CHECK(calls[0].transcript.find(ctx) != std::string::npos);
  CHECK(calls[2].transcript.find("Original Sentence: " + std::string(in.sentence(rec.target))) != std::string::npos);
  CHECK(rec.decision.chosen_index == 0);
}

TEST_CASE("without a leader image then voice are chained on one sentence") {
  MockRig rig(scripts::text_run());
  auto cfg = quick(2);
  cfg.use_leader = false;
  TextEngine engine(rig.client, cfg);
  auto in = ten();
  auto r = engine.run(in);
  CHECK(changed_ordinals(in, r.output).size() == 2);
  for (const auto& rec : r.rounds) {
    CHECK(rec.decision.synthetic);
    CHECK(rec.applied == std::vector<int>{0, 1});
    CHECK(rec.voice.replacement.find("[voice] [image] ") == 0);
  }
  for (const auto& c : rig.backend->calls()) CHECK(c.transcript.find(scripts::kTextLeaderCue) == std::string::npos);
}

TEST_CASE("extra text criteria join the suggestions") {
  auto script = scripts::text_run("image");
  script.push_back(scripts::tagging_critic("Inverted", "[nonlinear]", "time"));
  MockRig rig(script);
  auto cfg = quick(1);
  cfg.extra_criteria = {select_criteria(builtin_criteria(), {"inverted_nonlinear"}).at(0)};
  TextEngine engine(rig.client, cfg);
  auto rec = engine.run_round(ten(), 1, {});
  REQUIRE(rec.extra.size() == 1);
  CHECK(rec.extra[0].criterion_id == "inverted_nonlinear");
  CHECK(rec.extra[0].replacement.find("[nonlinear] ") == 0);
  CHECK(rec.suggestions().size() == 3);
  auto calls = rig.backend->calls();
  CHECK(calls.back().transcript.find("'inverted_nonlinear'") != std::string::npos);
}

TEST_CASE("hooks supply human suggestions and leader decisions") {
  MockRig rig(scripts::text_run());
  TextEngine engine(rig.client, quick(1));
  CrTextHooks hooks;
  hooks.extra_suggestions = [](int, const SentenceSpan&, const std::string&) {
    RevisionSuggestion s;
    s.criterion_id = "human";
    s.replacement = "A human wrote this.";
    s.author = Author::human("writer");
    return std::vector<RevisionSuggestion>{s};
  };
  hooks.leader_override = [](int, const std::vector<RevisionSuggestion>& all) -> std::optional<LeaderDecision> {
    LeaderDecision d;
    d.chosen_index = static_cast<int>(all.size()) - 1;
    d.author = Author::human("writer");
    return d;
  };
  auto in = ten();
  auto r = engine.run(in, &hooks);
  CHECK(r.rounds[0].applied == std::vector<int>{2});
  CHECK(r.output.body.find("A human wrote this.") != std::string::npos);
  CHECK(changed_ordinals(in, r.output).size() == 1);
}

TEST_CASE("text results survive a json round trip") {
  MockRig rig(scripts::text_run());
  TextEngine engine(rig.client, quick(2));
  auto r = engine.run(ten());
  nlohmann::json j = r;
  CHECK(j.get<CrTextResult>() == r);
  nlohmann::json c = quick(2);
  CHECK(c.get<CrTextConfig>().rng_seed == 7);
}

TEST_CASE("text config validation") {
  auto c = quick(1);
  c.context_window = -1;
  CHECK(error_code_of([&] { c.validate(); }) == ErrorCode::InvalidConfig);
  auto d = quick(1);
  d.extra_criteria = {default_plan_criteria()[0]};
  CHECK(error_code_of([&] { d.validate(); }) == ErrorCode::InvalidConfig);
}
