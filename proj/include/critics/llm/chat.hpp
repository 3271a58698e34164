#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "critics/error.hpp"

namespace critics::llm {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::User;
  std::string content;
};

struct ChatRequest {
  std::string model;
  double temperature = 1.0;
  std::vector<ChatMessage> messages;
  int max_retries = 3;

  /// Throws Error{InvalidRequest}: empty messages, last message not from the
  /// user, temperature outside [0, 2], negative retries.
  void validate() const;
  /// All message contents joined by newlines; what mock matchers inspect.
  std::string transcript() const;
};

struct Completion {
  std::string content;
  std::string provider_id;
  std::int64_t latency_ms = 0;
  int attempts = 1;  // 1 + number of retries that preceded the success
};

struct ProviderConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "LLM_API_KEY";
  std::string default_model = "gpt-3.5-turbo";
  int timeout_ms = 120000;
  /// JSON pointer to the completion text in the provider's response body.
  std::string response_path = "/choices/0/message/content";
};

/// Transport that turns one request into one completion or throws an Error
/// with a provider error code (ProviderUnreachable, RateLimited, Timeout,
/// MalformedProviderResponse, ...). Retrying is the client's job.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual Completion send(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
  /// Whether callers may issue requests from several threads at once and
  /// expect order-independent results.
  virtual bool concurrent() const { return true; }
};

struct RetryPolicy {
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  double jitter = 0.2;  // fraction, applied symmetrically
  std::uint64_t jitter_seed = 0;
  /// Replaced in tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
  /// Observer for each scheduled retry (attempt number is 1-based).
  std::function<void(int attempt, const std::string& reason, std::chrono::milliseconds delay)>
      on_retry;

  /// Delay before retry number `retry` (1-based), jitter included.
  std::chrono::milliseconds delay_for(int retry) const;
};

bool is_retryable(ErrorCode code);

/// Provider-agnostic completion entry point with exponential backoff.
class LlmClient {
 public:
  explicit LlmClient(std::shared_ptr<ChatBackend> backend, RetryPolicy policy = {});

  Completion complete(const ChatRequest& request) const;
  bool concurrent() const { return backend_->concurrent(); }
  const std::string backend_id() const { return backend_->id(); }

 private:
  std::shared_ptr<ChatBackend> backend_;
  RetryPolicy policy_;
};

/// Live chat-completions backend over HTTP(S).
class HttpBackend final : public ChatBackend {
 public:
  /// Throws Error{InvalidConfig} for an unusable URL, a non-positive timeout,
  /// or a named API-key variable that is unset.
  explicit HttpBackend(ProviderConfig config);

  Completion send(const ChatRequest& request) override;
  std::string id() const override { return "http:" + config_.endpoint_url; }

  /// Exposed for tests: the JSON body posted for `request`.
  static nlohmann::json request_body(const ChatRequest& request);
  /// Exposed for tests: extracts content per `response_path`.
  static std::string extract_content(const std::string& body, const std::string& response_path);

 private:
  ProviderConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
};

}  // namespace critics::llm
