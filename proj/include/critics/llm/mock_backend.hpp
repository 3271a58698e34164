#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "critics/error.hpp"
#include "critics/llm/chat.hpp"

namespace critics::llm {

/// One scripted reply. Exactly one of `text`, `responder` or `fail` is used
/// (responder wins over text; fail wins over both).
struct MockResponse {
  std::string text;
  std::function<std::string(const ChatRequest&)> responder;
  std::optional<ErrorCode> fail;

  static MockResponse reply(std::string text) { return {std::move(text), {}, {}}; }
  static MockResponse failure(ErrorCode code) { return {{}, {}, code}; }
  static MockResponse dynamic(std::function<std::string(const ChatRequest&)> fn) {
    return {{}, std::move(fn), {}};
  }
};

struct MockEntry {
  std::function<bool(const std::string& transcript)> matcher;  // empty = always
  std::string description;                                     // for miss reports
  MockResponse response;
  int repeat = 1;  // < 0: never exhausted

  static MockEntry always(MockResponse r, int repeat = 1);
  static MockEntry contains(std::string needle, MockResponse r, int repeat = 1);
};

/// Judge responder: answers every metric with A or B depending on which
/// "Storyline"/"Story plan" section of the prompt contains `marker`, and with
/// C (tie) when both or neither do.
std::string prefer_marker_reply(const std::string& transcript, const std::string& marker);
/// Judge responder: prefers the section carrying the larger `<prefix><N>` tag.
std::string prefer_highest_reply(const std::string& transcript, const std::string& prefix);

struct MockCall {
  std::string transcript;
  std::string model;
  double temperature = 0;
  int entry = -1;  // index of the consumed entry; -1 on a miss
};

/// Deterministic scripted backend. Each send() consumes the first entry that
/// still has uses left and whose matcher accepts the request transcript.
class MockBackend final : public ChatBackend {
 public:
  explicit MockBackend(std::vector<MockEntry> script, std::string id = "mock");

  /// Script JSON: {"entries": [...]} or a bare array. Entry keys:
  ///   matcher   "contains" | "regex" | "all" (array of substrings); none = always
  ///   response  "response" (literal reply) | "response_file" (relative to base_dir) |
  ///             "fail" (unreachable, rate_limited, timeout, malformed, server_error) |
  ///             "prefer" (marker, see prefer_marker_reply) |
  ///             "prefer_highest" (tag prefix, see prefer_highest_reply)
  ///   "repeat"  integer or "always"
  /// Throws Error{InvalidConfig}.
  static std::vector<MockEntry> parse_script(const nlohmann::json& doc,
                                             const std::filesystem::path& base_dir);
  static std::vector<MockEntry> load_script(const std::filesystem::path& file);

  Completion send(const ChatRequest& request) override;
  std::string id() const override { return id_; }
  bool concurrent() const override { return false; }

  std::vector<MockCall> calls() const;
  std::vector<std::string> misses() const;
  std::size_t remaining() const;

 private:
  mutable std::mutex mu_;
  std::vector<MockEntry> script_;
  std::vector<int> used_;
  std::vector<MockCall> calls_;
  std::vector<std::string> misses_;
  std::string id_;
};

}  // namespace critics::llm
