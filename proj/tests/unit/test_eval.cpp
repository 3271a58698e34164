#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "critics/agreement.hpp"
#include "critics/eval.hpp"
#include "../support/generators.hpp"
#include "../support/mock.hpp"
#include "../support/oracles.hpp"

using namespace critics;

namespace {

VerdictSet set_of(std::vector<Outcome> outs, const MetricSet& ms) {
  VerdictSet s;
  for (std::size_t i = 0; i < outs.size(); ++i) s.verdicts.push_back({ms.metrics[i].id, outs[i]});
  return s;
}

}  // namespace

TEST_CASE("worked verdict reply parses to A, B, B, both") {
  auto v = parse_verdicts("1:[[A]], 2:[[B]], 3:[[B]], 4:[[BY]]", MetricSet::plan());
  REQUIRE(v.size() == 4);
  CHECK(v[0].outcome == Outcome::A);
  CHECK(v[1].outcome == Outcome::B);
  CHECK(v[2].outcome == Outcome::B);
  CHECK(v[3].outcome == Outcome::Both);
  CHECK(v[3].metric_id == "relevant");
}

TEST_CASE("verdict parsing ignores prose and keeps the last answer per position") {
  auto raw = "Looking at 1:[[B]] first... Final answer:\n1: [[A]]\n2) [[C]]\n3. [[OB]]\n4:[[UN]]";
  auto v = parse_verdicts(raw, MetricSet::plan());
  CHECK(v[0].outcome == Outcome::A);
  CHECK(v[1].outcome == Outcome::Tie);
  CHECK(v[2].outcome == Outcome::B);
  CHECK(v[3].outcome == Outcome::Undetermined);
}

TEST_CASE("unknown or missing verdict tokens name the position") {
  try {
    parse_verdicts("1:[[A]], 2:[[Q]], 3:[[B]], 4:[[BY]]", MetricSet::plan());
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::VerdictParseFailure);
    CHECK(e.detail() == "position 2: Q");
  }
  try {
    parse_verdicts("1:[[A]], 2:[[B]], 4:[[BY]]", MetricSet::plan());
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.detail() == "position 3: ");
  }
}

TEST_CASE("render and parse round-trip over every outcome") {
  const std::vector<Outcome> all = {Outcome::A,       Outcome::B,   Outcome::Both,
                                    Outcome::Neither, Outcome::Tie, Outcome::Undetermined};
  testgen::Rand r(11);
  for (auto ms : {MetricSet::plan(), MetricSet::text(), MetricSet::plan_evaluator()}) {
    for (int iter = 0; iter < 300; ++iter) {
      std::vector<Verdict> v;
      for (const auto& m : ms.metrics) v.push_back({m.id, all[r.below(static_cast<int>(all.size()))]});
      CHECK(parse_verdicts(render_verdicts(v, ms), ms) == v);
    }
  }
  for (auto o : all) CHECK(parse_outcome(to_string(o)) == o);
}

TEST_CASE("flip is an involution and derandomize mirrors BA orders") {
  for (auto o : {Outcome::A, Outcome::B, Outcome::Both, Outcome::Neither, Outcome::Tie, Outcome::Undetermined})
    CHECK(flip(flip(o)) == o);
  std::vector<Verdict> v = {{"x", Outcome::A}, {"y", Outcome::Both}, {"z", Outcome::B}};
  auto m = derandomize(v, Order::BA);
  CHECK(m[0].outcome == Outcome::B);
  CHECK(m[1].outcome == Outcome::Both);
  CHECK(m[2].outcome == Outcome::A);
  CHECK(derandomize(v, Order::AB) == v);
}

TEST_CASE("judge_pair mirrors verdicts back to argument order") {
  // A judge that always prefers whichever plan mentions "lighthouse".
  MockRig rig({llm::MockEntry::always(
      llm::MockResponse::dynamic([](const llm::ChatRequest& r) {
        return llm::prefer_marker_reply(r.transcript(), "lighthouse");
      }),
      -1)});
  int ba = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto s = judge_pair(rig.client, llm::PromptCatalog::builtin(), "a lighthouse keeper", "a baker", MetricSet::plan(),
                        seed);
    ba += s.presentation_order == Order::BA;
    for (const auto& v : s.verdicts) CHECK(v.outcome != Outcome::B);
    CHECK(s.verdicts[0].outcome == Outcome::A);
  }
  CHECK(ba > 5);
  CHECK(ba < 35);
}

TEST_CASE("judge_pair reprompts after an unparseable reply") {
  MockRig rig({llm::MockEntry::always(llm::MockResponse::reply("I like both.")),
               llm::MockEntry::always(llm::MockResponse::reply("1:[[A]], 2:[[A]], 3:[[B]], 4:[[BN]]"))});
  auto s = judge_pair(rig.client, llm::PromptCatalog::builtin(), "x", "y", MetricSet::plan(), 0);
  CHECK(s.raw_response.find("4:[[BN]]") != std::string::npos);
  auto calls = rig.backend->calls();
  REQUIRE(calls.size() == 2);
  CHECK(calls[1].transcript.find("I like both.") != std::string::npos);
  CHECK(calls[0].temperature == 0.0);
  CHECK(calls[0].model == "gpt-4");
  CHECK(error_code_of([&] {
          judge_pair(rig.client, llm::PromptCatalog::builtin(), " ", "y", MetricSet::plan(), 0);
        }) == ErrorCode::EmptyInput);
}

TEST_CASE("a first-position-biased judge is cancelled by the presentation coin") {
  MockRig rig({llm::MockEntry::always(llm::MockResponse::reply("1:[[A]], 2:[[A]], 3:[[A]], 4:[[OA]]"), -1)});
  std::vector<VerdictSet> sets;
  for (std::uint64_t seed = 0; seed < 1000; ++seed)
    sets.push_back(judge_pair(rig.client, llm::PromptCatalog::builtin(), "plan one", "plan two", MetricSet::plan(),
                              seed * 7919 + 1));
  auto t = aggregate_win_rates(sets, MetricSet::plan());
  for (const auto& row : t.rows) {
    CHECK(row.rate_a >= 45.0);
    CHECK(row.rate_a <= 55.0);
    CHECK(row.rate_a + row.rate_b == doctest::Approx(100.0));
  }
}

TEST_CASE("win rates credit both sides for a both verdict") {
  auto ms = MetricSet::text();
  std::vector<VerdictSet> sets;
  for (auto o : {Outcome::A, Outcome::Both, Outcome::B}) sets.push_back(set_of({o, o, o, o}, ms));
  auto t = aggregate_win_rates(sets, ms);
  for (const auto& row : t.rows) {
    CHECK(std::abs(row.rate_a - 66.67) <= 0.01);
    CHECK(std::abs(row.rate_b - 66.67) <= 0.01);
    CHECK(row.n == 3);
  }
  std::vector<VerdictSet> both(5, set_of({Outcome::Both, Outcome::Both, Outcome::Both, Outcome::Both}, ms));
  auto t2 = aggregate_win_rates(both, ms);
  CHECK(t2.at("creative").rate_a == 100.0);
  CHECK(t2.at("creative").rate_b == 100.0);

  nlohmann::json j = t;
  CHECK(j.dump().find("66.67") != std::string::npos);
}

TEST_CASE("win-rate aggregation rejects empty and mixed input") {
  CHECK(error_code_of([] { aggregate_win_rates({}, MetricSet::plan()); }) == ErrorCode::EmptyInput);
  auto s = set_of({Outcome::A, Outcome::A, Outcome::A, Outcome::A}, MetricSet::text());
  CHECK(error_code_of([&] { aggregate_win_rates({s}, MetricSet::plan()); }) == ErrorCode::MixedMetricSets);
  s.verdicts.pop_back();
  CHECK(error_code_of([&] { aggregate_win_rates({s}, MetricSet::text()); }) == ErrorCode::MixedMetricSets);
}

TEST_CASE("cohen kappa on the worked four-item example is one half") {
  std::vector<std::string> r1 = {"A", "A", "B", "B"}, r2 = {"A", "B", "B", "B"};
  CHECK(cohen_kappa(r1, r2) == 0.5);
  CHECK(cohen_kappa(r2, r1) == 0.5);
  CHECK(cohen_kappa(r1, r1) == 1.0);
  std::vector<std::string> same = {"A", "A"};
  CHECK(cohen_kappa(same, same) == 1.0);
  CHECK(error_code_of([&] { cohen_kappa(r1, same); }) == ErrorCode::LengthMismatch);
  CHECK(error_code_of([] { cohen_kappa(std::vector<int>{}, std::vector<int>{}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("fleiss kappa edge cases") {
  CHECK(fleiss_kappa({{3, 0}, {0, 3}, {3, 0}}) == 1.0);
  CHECK(fleiss_kappa({{2, 0}, {2, 0}}) == 1.0);
  CHECK(error_code_of([] { fleiss_kappa({}); }) == ErrorCode::EmptyInput);
  CHECK(error_code_of([] { fleiss_kappa({{2, 1}, {1, 1}}); }) == ErrorCode::RaggedMatrix);
  CHECK(error_code_of([] { fleiss_kappa({{2, 1}, {1, 1, 1}}); }) == ErrorCode::RaggedMatrix);
  CHECK(error_code_of([] { fleiss_kappa({{1, 0}, {0, 1}}); }) == ErrorCode::TooFewRaters);
  // The classic 10-item, 14-rater table.
  std::vector<std::vector<int>> wiki = {{0, 0, 0, 0, 14}, {0, 2, 6, 4, 2}, {0, 0, 3, 5, 6}, {0, 3, 9, 2, 0},
                                        {2, 2, 8, 1, 1},  {7, 7, 0, 0, 0}, {3, 2, 6, 3, 0}, {2, 5, 3, 2, 2},
                                        {6, 5, 2, 1, 0},  {0, 2, 2, 3, 7}};
  CHECK(fleiss_kappa(wiki) == doctest::Approx(0.210).epsilon(0.005));
}

TEST_CASE("kappas match brute-force oracles on random instances") {
  testgen::Rand r(2024);
  for (int iter = 0; iter < 1000; ++iter) {
    auto n = 1 + r.below(12);
    auto k = 1 + r.below(4);
    std::vector<int> r1, r2;
    for (int i = 0; i < n; ++i) {
      r1.push_back(r.below(k));
      r2.push_back(r.coin() ? r1.back() : r.below(k));
    }
    CHECK(std::abs(cohen_kappa(r1, r2) - testgen::cohen_oracle(r1, r2)) < 1e-9);

    auto raters = 2 + r.below(5);
    std::vector<std::vector<int>> labels(1 + r.below(10));
    for (auto& item : labels)
      for (int j = 0; j < raters; ++j) item.push_back(r.below(k));
    CHECK(std::abs(fleiss_kappa(category_counts(labels)) - testgen::fleiss_oracle(labels)) < 1e-9);
  }
}

TEST_CASE("kappa labels fold ties into neither") {
  CHECK(kappa_label(Outcome::Tie) == Outcome::Neither);
  CHECK(kappa_label(Outcome::Undetermined) == Outcome::Neither);
  CHECK(kappa_label(Outcome::Both) == Outcome::Both);
}

TEST_CASE("agreement reports pair every rater and pool them for fleiss") {
  using O = Outcome;
  std::map<std::string, std::vector<Outcome>> raters{
      {"judge", {O::A, O::A, O::B, O::B}}, {"ann", {O::A, O::B, O::B, O::B}}};
  auto r = agreement_report(raters);
  CHECK(r.cohen.size() == 1);
  CHECK(r.cohen.at("ann~judge") == doctest::Approx(0.5));
  CHECK(r.n_items == 4);
  CHECK(r.n_categories == 2);
  REQUIRE(r.fleiss);
  CHECK(*r.fleiss == doctest::Approx(fleiss_kappa({{2, 0}, {1, 1}, {0, 2}, {0, 2}})));

  auto solo = agreement_report({{"judge", {O::A, O::Tie}}});
  CHECK(solo.cohen.empty());
  CHECK_FALSE(solo.fleiss);
  CHECK(solo.n_categories == 2);  // the tie folds into neither

  raters["late"] = {O::A};
  CHECK(error_code_of([&] { agreement_report(raters); }) == ErrorCode::LengthMismatch);
  CHECK(error_code_of([] { agreement_report({}); }) == ErrorCode::EmptyInput);
}
