#include <doctest.h>

#include <csignal>
#include <fstream>
#include <future>
#include <pthread.h>
#include <thread>

#include <httplib.h>

#include "critics/cli.hpp"
#include "critics/crplan.hpp"
#include "critics/sentences.hpp"
#include "critics/session.hpp"
#include "../support/fixtures.hpp"
#include "../support/mock.hpp"
#include "../support/temp_dir.hpp"

using namespace critics;
using namespace critics::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

Settings plan_mock(Settings extra = {}) {
  extra["mock_script"] = fixture_path("scripts/plan_rounds.json").string();
  extra.emplace("seed", "7");
  return extra;
}

Settings text_mock(Settings extra = {}) {
  extra["mock_script"] = fixture_path("scripts/text_rounds.json").string();
  extra.emplace("seed", "7");
  return extra;
}

}  // namespace

TEST_CASE("config files are key = value with sections") {
  auto s = parse_config_text(
      "# defaults for the desk runs\n"
      "rounds = 2\n"
      "criteria = \"originality, ending\"\n"
      "no-leader-ish = x\n"
      "\n"
      "[provider]\n"
      "; a comment\n"
      "endpoint_url = http://localhost:9/v1/chat\n");
  CHECK(s.at("rounds") == "2");
  CHECK(s.at("criteria") == "originality, ending");
  CHECK(s.at("no_leader_ish") == "x");
  CHECK(s.at("provider.endpoint_url") == "http://localhost:9/v1/chat");
  CHECK(error_code_of([] { parse_config_text("rounds 3\n"); }) == ErrorCode::InvalidConfig);
  CHECK(error_code_of([] { parse_config_text("[provider\n"); }) == ErrorCode::InvalidConfig);
  CHECK(error_code_of([] { parse_config_text(" = 3\n"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("flags override the config file, which overrides defaults") {
  auto merged = merge(parse_config_text("rounds = 2\nseed = 9\nleader = false\n"), {{"rounds", "5"}});
  auto c = plan_config(merged);
  CHECK(c.rounds == 5);
  CHECK(c.rng_seed == 9);
  CHECK_FALSE(c.use_leader);
  CHECK(c.use_personas);
  CHECK(c.criteria == default_plan_criteria());

  auto t = text_config({{"window", "2"}, {"criteria", "inverted_nonlinear"}});
  CHECK(t.rounds == 3);
  CHECK(t.context_window == 2);
  REQUIRE(t.extra_criteria.size() == 1);
  CHECK(t.extra_criteria[0].id == "inverted_nonlinear");

  CHECK(error_code_of([] { plan_config({{"rounds", "three"}}); }) == ErrorCode::InvalidConfig);
  CHECK(error_code_of([] { plan_config({{"leader", "maybe"}}); }) == ErrorCode::InvalidConfig);
  CHECK(error_code_of([] { plan_config({{"criteria", "nope"}}); }) == ErrorCode::InvalidConfig);
  CHECK(error_code_of([] { check_keys({{"roundz", "1"}}, plan_keys()); }) == ErrorCode::InvalidConfig);

  auto p = provider_config({{"provider.model", "local"}, {"provider.timeout_ms", "500"}});
  CHECK(p.default_model == "local");
  CHECK(p.timeout_ms == 500);
}

TEST_CASE("cmd_plan writes a result, the selected plan and a summary") {
  TempDir out;
  auto input = fixture_path("skateboard_plan.txt");
  REQUIRE(cmd_plan({{input}, out.path, plan_mock({{"rounds", "3"}})}) == 0);
  auto result = load(out.path / "skateboard_plan.result.json").get<CrPlanResult>();
  CHECK(result.rounds.size() == 3);
  CHECK(result.candidates.size() == 4);
  CHECK(result.selected_index == 3);
  CHECK(slurp(out.path / "skateboard_plan.plan.txt") == render_story_package(result.candidates[3]));
  auto summary = load(out.path / "summary.json");
  CHECK(summary.at("succeeded") == 1);
  CHECK(summary.at("failed") == 0);
  CHECK(summary.at("items")[0].at("outputs").size() == 2);
}

TEST_CASE("cmd_plan with zero rounds returns the input plan") {
  TempDir out;
  auto input = fixture_path("skateboard_plan.txt");
  REQUIRE(cmd_plan({{input}, out.path, plan_mock({{"rounds", "0"}})}) == 0);
  CHECK(slurp(out.path / "skateboard_plan.plan.txt") == render_story_package(parse_story_package(slurp(input))));
}

TEST_CASE("single-criterion leaderless runs apply every critique") {
  TempDir out;
  REQUIRE(cmd_plan({{fixture_path("skateboard_plan.txt")}, out.path,
                    plan_mock({{"leader", "false"}, {"criteria", "originality"}})}) == 0);
  auto result = load(out.path / "skateboard_plan.result.json").get<CrPlanResult>();
  REQUIRE(result.rounds.size() == 3);
  for (const auto& r : result.rounds) {
    CHECK(r.applied == std::vector<int>{0, 1, 2});
    for (const auto& c : r.critiques) CHECK(c.criterion_id == "originality");
  }
}

TEST_CASE("repeated runs with the same seed and script are byte-identical") {
  TempDir a, b;
  auto inputs = std::vector<fs::path>{fixture_path("skateboard_plan.txt"), fixture_path("aimee_plan.txt")};
  REQUIRE(cmd_plan({inputs, a.path, plan_mock({{"jobs", "1"}})}) == 0);
  REQUIRE(cmd_plan({inputs, b.path, plan_mock({{"jobs", "2"}})}) == 0);
  for (auto name : {"summary.json", "skateboard_plan.result.json", "aimee_plan.result.json", "aimee_plan.plan.txt"})
    CHECK(slurp(a.path / name) == slurp(b.path / name));
}

TEST_CASE("per-file failures give exit 1 and still write the summary") {
  TempDir out;
  std::ofstream(out.path / "broken.txt") << "Premise: only a premise\n";
  auto inputs = std::vector<fs::path>{fixture_path("skateboard_plan.txt"), out.path / "broken.txt"};
  CHECK(cmd_plan({inputs, out.path / "o", plan_mock()}) == 1);
  auto summary = load(out.path / "o" / "summary.json");
  CHECK(summary.at("succeeded") == 1);
  CHECK(summary.at("failed") == 1);
  CHECK(summary.at("items")[1].at("error").at("code") == "MissingSection");
}

TEST_CASE("bad settings fail before any input runs") {
  TempDir out;
  CHECK(cmd_plan({{fixture_path("skateboard_plan.txt")}, out.path, plan_mock({{"rounds", "-1"}})}) == 2);
  CHECK(load(out.path / "summary.json").at("error").at("code") == "InvalidConfig");
  CHECK(cmd_text({{}, out.path, text_mock()}) == 2);
  CHECK(load(out.path / "summary.json").at("error").at("code") == "EmptyInput");
  CHECK(cmd_plan({{fixture_path("skateboard_plan.txt")}, out.path, plan_mock({{"window", "2"}})}) == 2);
}

TEST_CASE("an exhausted script fails the item and keeps the partial result") {
  TempDir out;
  // Nine refinements are scripted; a leaderless run of four rounds needs twelve.
  CHECK(cmd_plan({{fixture_path("skateboard_plan.txt")}, out.path, plan_mock({{"leader", "false"}, {"rounds", "4"}})}) ==
        1);
  auto summary = load(out.path / "summary.json");
  CHECK(summary.at("items")[0].at("error").at("code") == "RunAborted");
  auto partial = load(out.path / "skateboard_plan.result.json").get<CrPlanResult>();
  CHECK(partial.rounds.size() == 3);
}

TEST_CASE("cmd_text changes three sentences and nothing else") {
  TempDir out;
  auto input = fixture_path("story_ten.txt");
  REQUIRE(cmd_text({{input}, out.path, text_mock()}) == 0);
  auto before = segment_sentences(slurp(input));
  auto result = load(out.path / "story_ten.result.json").get<CrTextResult>();
  CHECK(slurp(out.path / "story_ten.story.txt") == result.output.body);
  REQUIRE(result.rounds.size() == 3);
  std::set<int> ordinals;
  for (const auto& r : result.rounds) ordinals.insert(r.target.ordinal);
  CHECK(ordinals.size() == 3);

  // Rebuild the output from the input by splicing each round's choice in place.
  auto rebuilt = before;
  for (const auto& r : result.rounds) {
    auto chosen = r.suggestions().at(r.decision.chosen_index).replacement;
    rebuilt = replace_span(rebuilt, rebuilt.sentence_index.at(r.target.ordinal), chosen);
  }
  CHECK(rebuilt.body == result.output.body);

  TempDir zero;
  REQUIRE(cmd_text({{input}, zero.path, text_mock({{"rounds", "0"}})}) == 0);
  CHECK(slurp(zero.path / "story_ten.story.txt") == slurp(input));
}

TEST_CASE("cmd_eval writes win rates and agreement") {
  TempDir out;
  Settings s{{"mock_script", fixture_path("eval/judge_script.json").string()}, {"seed", "3"}};
  REQUIRE(cmd_eval(fixture_path("eval/manifest.json"), out.path, s) == 0);
  auto rates = load(out.path / "win_rates.json");
  // The judge prefers the "restless" plan, which is B in the first pair and A in the second.
  CHECK(rates.at("verdicts")[0].at("verdicts").at("interesting") == "B");
  CHECK(rates.at("verdicts")[1].at("verdicts").at("interesting") == "A");
  CHECK(rates.at("win_rates").at("interesting").at("rate_a") == 50.0);
  auto agreement = load(out.path / "agreement.json");
  CHECK(agreement.at("n_items") == 8);
  CHECK(agreement.at("cohen").size() == 3);
  CHECK(agreement.at("fleiss").is_number());

  TempDir again;
  REQUIRE(cmd_eval(fixture_path("eval/manifest.json"), again.path, s) == 0);
  CHECK(slurp(out.path / "win_rates.json") == slurp(again.path / "win_rates.json"));
}

TEST_CASE("cmd_eval rejects an empty manifest") {
  TempDir out;
  std::ofstream(out.path / "empty.json") << R"({"stage": "plan", "pairs": []})";
  Settings s{{"mock_script", fixture_path("eval/judge_script.json").string()}};
  CHECK(cmd_eval(out.path / "empty.json", out.path / "o", s) == 2);
  CHECK(load(out.path / "o" / "summary.json").at("error").at("code") == "EmptyInput");
}

TEST_CASE("cmd_serve round-trips a session and stops on SIGTERM") {
  TempDir data;
  ServeOptions opts;
  opts.port = 0;
  opts.data_dir = data.path;
  opts.settings = {{"mock_script", fixture_path("scripts/plan_rounds.json").string()}};
  std::promise<int> bound;
  opts.on_listening = [&](int port) { bound.set_value(port); };
  std::promise<pthread_t> self;
  std::thread serving([&] {
    self.set_value(pthread_self());
    try {
      cmd_serve(opts);
    } catch (...) {
      bound.set_exception(std::current_exception());
    }
  });
  auto handle = self.get_future().get();
  auto port = bound.get_future().get();

  httplib::Client http("127.0.0.1", port);
  json body = {{"stage", "plan"}, {"subject", read_fixture("skateboard_plan.txt")}, {"config", {{"rounds", 1}}}};
  auto created = http.Post("/sessions", body.dump(), "application/json");
  REQUIRE(created);
  REQUIRE(created->status == 201);
  auto id = json::parse(created->body).at("id").get<std::string>();
  auto advanced = http.Post("/sessions/" + id + "/advance", "{}", "application/json");
  REQUIRE(advanced);
  CHECK(json::parse(advanced->body).at("status") == "finalized");

  pthread_kill(handle, SIGTERM);
  serving.join();

  // A restarted service sees the same session.
  MockRig rig(MockRig::silent());
  SessionService reloaded(rig.client, data.path);
  CHECK(json(reloaded.get_state(id)).dump() == json::parse(advanced->body).dump());
}
