#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "critics/error.hpp"
#include "critics/llm/chat.hpp"
#include "critics/llm/mock_backend.hpp"

using namespace critics;
using namespace critics::llm;

namespace {

ChatRequest user_request(std::string text, int retries = 3) {
  ChatRequest r;
  r.model = "gpt-3.5-turbo";
  r.messages.push_back({Role::User, std::move(text)});
  r.max_retries = retries;
  return r;
}

RetryPolicy recording_policy(std::vector<std::chrono::milliseconds>& slept) {
  RetryPolicy p;
  p.sleep = [&slept](std::chrono::milliseconds d) { slept.push_back(d); };
  return p;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST_CASE("scripted reply") {
  auto mock = std::make_shared<MockBackend>(std::vector{MockEntry::always(MockResponse::reply("OK"))});
  LlmClient client(mock);
  auto c = client.complete(user_request("anything"));
  CHECK(c.content == "OK");
  CHECK(c.attempts == 1);
  CHECK(c.provider_id == "mock");
}

TEST_CASE("two failures then success retries twice with exponential delays") {
  std::vector<std::chrono::milliseconds> slept;
  auto mock = std::make_shared<MockBackend>(std::vector{
      MockEntry::always(MockResponse::failure(ErrorCode::ProviderUnreachable), 1),
      MockEntry::always(MockResponse::failure(ErrorCode::RateLimited), 1),
      MockEntry::always(MockResponse::reply("fine"))});
  LlmClient client(mock, recording_policy(slept));
  auto c = client.complete(user_request("x", 3));
  CHECK(c.content == "fine");
  CHECK(c.attempts == 3);
  REQUIRE(slept.size() == 2);
  // base 1s, factor 2, jitter within 20%
  CHECK(slept[0].count() >= 800);
  CHECK(slept[0].count() <= 1200);
  CHECK(slept[1].count() >= 1600);
  CHECK(slept[1].count() <= 2400);
}

TEST_CASE("retry count never exceeds max_retries") {
  for (int retries : {0, 1, 2, 5}) {
    std::vector<std::chrono::milliseconds> slept;
    auto mock = std::make_shared<MockBackend>(
        std::vector{MockEntry::always(MockResponse::failure(ErrorCode::ProviderUnreachable), -1)});
    LlmClient client(mock, recording_policy(slept));
    CHECK(code_of([&] { client.complete(user_request("x", retries)); }) == ErrorCode::ProviderUnreachable);
    CHECK(slept.size() == static_cast<std::size_t>(retries));
    CHECK(mock->calls().size() == static_cast<std::size_t>(retries + 1));
  }
}

TEST_CASE("malformed responses are not retried") {
  std::vector<std::chrono::milliseconds> slept;
  auto mock = std::make_shared<MockBackend>(std::vector{
      MockEntry::always(MockResponse::failure(ErrorCode::MalformedProviderResponse)),
      MockEntry::always(MockResponse::reply("never"))});
  LlmClient client(mock, recording_policy(slept));
  CHECK(code_of([&] { client.complete(user_request("x")); }) == ErrorCode::MalformedProviderResponse);
  CHECK(slept.empty());
}

TEST_CASE("jitter stays within the band for every retry") {
  RetryPolicy p;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    p.jitter_seed = seed;
    for (int k = 1; k <= 6; ++k) {
      double nominal = 1000.0 * (1 << (k - 1));
      auto d = static_cast<double>(p.delay_for(k).count());
      CHECK(d >= nominal * 0.8 - 1);
      CHECK(d <= nominal * 1.2 + 1);
    }
  }
}

TEST_CASE("request validation") {
  ChatRequest r;
  CHECK(code_of([&] { r.validate(); }) == ErrorCode::InvalidRequest);
  r.messages.push_back({Role::Assistant, "hi"});
  CHECK(code_of([&] { r.validate(); }) == ErrorCode::InvalidRequest);
  r.messages.push_back({Role::User, "go"});
  r.temperature = 2.5;
  CHECK(code_of([&] { r.validate(); }) == ErrorCode::InvalidRequest);
  r.temperature = 0;
  CHECK_NOTHROW(r.validate());
}

TEST_CASE("matchers select entries and exhaustion is reported") {
  auto mock = std::make_shared<MockBackend>(std::vector{
      MockEntry::contains("Create three persona", MockResponse::reply("personas")),
      MockEntry::always(MockResponse::reply("other"))});
  LlmClient client(mock);
  CHECK(client.complete(user_request("Please write")).content == "other");
  CHECK(client.complete(user_request("Create three persona for these experts")).content == "personas");
  CHECK(code_of([&] { client.complete(user_request("again")); }) == ErrorCode::ScriptExhausted);

  auto one = std::make_shared<MockBackend>(std::vector{MockEntry::always(MockResponse::reply("X"))});
  LlmClient c1(one);
  CHECK(c1.complete(user_request("a")).content == "X");
  CHECK(code_of([&] { c1.complete(user_request("b")); }) == ErrorCode::ScriptExhausted);
}

TEST_CASE("unmatched prompt records a miss") {
  auto mock = std::make_shared<MockBackend>(
      std::vector{MockEntry::contains("needle", MockResponse::reply("hit"))});
  LlmClient client(mock);
  CHECK(code_of([&] { client.complete(user_request("haystack")); }) == ErrorCode::NoMatcherAccepts);
  REQUIRE(mock->misses().size() == 1);
  CHECK(mock->misses()[0] == "haystack");
  CHECK(mock->remaining() == 1);
}

TEST_CASE("script files load every entry kind") {
  auto dir = std::filesystem::temp_directory_path() / "critics_mock_script";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "reply.txt") << "from file";
  std::ofstream(dir / "script.json") << R"({"entries": [
    {"contains": "file", "response_file": "reply.txt"},
    {"regex": "^num+ber", "response": "regex hit"},
    {"all": ["x", "y"], "response": "both", "repeat": 2},
    {"contains": "boom", "fail": "timeout"},
    {"prefer": "WINNER", "repeat": "always"}
  ]})";
  auto mock = std::make_shared<MockBackend>(MockBackend::load_script(dir / "script.json"));
  std::vector<std::chrono::milliseconds> slept;
  RetryPolicy p;
  p.sleep = [&](auto d) { slept.push_back(d); };
  LlmClient client(mock, p);
  CHECK(client.complete(user_request("a file please")).content == "from file");
  CHECK(client.complete(user_request("nummber")).content == "regex hit");
  CHECK(client.complete(user_request("x and y")).content == "both");
  CHECK(client.complete(user_request("y then x")).content == "both");
  CHECK(code_of([&] { client.complete(user_request("boom", 0)); }) == ErrorCode::Timeout);
  auto judge = "Compare.\nStoryline A:\nplain\n\nStoryline B:\nWINNER here\n\nAnswer.";
  CHECK(client.complete(user_request(judge)).content == "1:[[B]], 2:[[B]], 3:[[B]], 4:[[B]]");
  std::filesystem::remove_all(dir);

  CHECK_THROWS_AS(MockBackend::parse_script(nlohmann::json::array(), "."), Error);
  CHECK_THROWS_AS(MockBackend::parse_script(nlohmann::json::parse(R"([{"fail": "bogus"}])"), "."), Error);
}

TEST_CASE("judge responders read the candidate sections") {
  auto prompt = [](std::string a, std::string b) {
    return "Intro.\nStory plan A:\n" + a + "\nStory plan B:\n" + b + "\nTask 1 question:";
  };
  CHECK(prefer_marker_reply(prompt("has M", "none"), "M") == "1:[[A]], 2:[[A]], 3:[[A]], 4:[[A]]");
  CHECK(prefer_marker_reply(prompt("M", "M"), "M") == "1:[[C]], 2:[[C]], 3:[[C]], 4:[[C]]");
  CHECK(prefer_highest_reply(prompt("rev-2", "rev-10"), "rev-") == "1:[[B]], 2:[[B]], 3:[[B]], 4:[[B]]");
  CHECK(prefer_highest_reply(prompt("rev-3", "plain"), "rev-") == "1:[[A]], 2:[[A]], 3:[[A]], 4:[[A]]");
}

TEST_CASE("http backend request body and content extraction") {
  auto r = user_request("hello");
  r.messages.insert(r.messages.begin(), {Role::System, "be brief"});
  r.temperature = 0;
  auto body = HttpBackend::request_body(r);
  CHECK(body.at("model") == "gpt-3.5-turbo");
  CHECK(body.at("temperature") == 0.0);
  CHECK(body.at("messages").at(0).at("role") == "system");
  CHECK(body.at("messages").at(1).at("content") == "hello");

  auto content = HttpBackend::extract_content(R"({"choices":[{"message":{"content":"hi"}}]})",
                                              "/choices/0/message/content");
  CHECK(content == "hi");
  CHECK(code_of([] { HttpBackend::extract_content("not json", "/a"); }) == ErrorCode::MalformedProviderResponse);
  CHECK(code_of([] { HttpBackend::extract_content(R"({"choices":[]})", "/choices/0/message/content"); }) ==
        ErrorCode::MalformedProviderResponse);
}

TEST_CASE("http backend configuration checks") {
  ProviderConfig cfg;
  cfg.api_key_env = "CRITICS_TEST_SURELY_UNSET_KEY";
  CHECK(code_of([&] { HttpBackend b(cfg); }) == ErrorCode::InvalidConfig);
  cfg.api_key_env = "";
  cfg.timeout_ms = 0;
  CHECK(code_of([&] { HttpBackend b(cfg); }) == ErrorCode::InvalidConfig);
  cfg.timeout_ms = 1000;
  cfg.endpoint_url = "ftp://host/x";
  CHECK(code_of([&] { HttpBackend b(cfg); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("http backend maps an unreachable endpoint") {
  ProviderConfig cfg;
  cfg.api_key_env = "";
  cfg.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
  cfg.timeout_ms = 500;
  HttpBackend b(cfg);
  auto code = code_of([&] { b.send(user_request("x")); });
  CHECK((code == ErrorCode::ProviderUnreachable || code == ErrorCode::Timeout));
}
