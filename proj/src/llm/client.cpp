#include <cmath>
#include <thread>

#include "critics/llm/chat.hpp"
#include "critics/rng.hpp"

namespace critics::llm {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

void ChatRequest::validate() const {
  if (messages.empty()) throw Error(ErrorCode::InvalidRequest, "chat request has no messages");
  if (messages.back().role != Role::User)
    throw Error(ErrorCode::InvalidRequest, "last chat message must come from the user");
  if (!(temperature >= 0.0 && temperature <= 2.0))
    throw Error(ErrorCode::InvalidRequest, "temperature must be within [0, 2]",
                std::to_string(temperature));
  if (max_retries < 0) throw Error(ErrorCode::InvalidRequest, "max_retries must be >= 0");
}

std::string ChatRequest::transcript() const {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i) out += '\n';
    out += messages[i].content;
  }
  return out;
}

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
  double ms = static_cast<double>(base_delay.count()) * std::pow(factor, retry - 1);
  if (jitter > 0) {
    // uniform in [-jitter, +jitter]
    auto draw = rng::keyed(jitter_seed, static_cast<std::uint64_t>(retry));
    double u = static_cast<double>(draw >> 11) / static_cast<double>(1ULL << 53);
    ms *= 1.0 + jitter * (2.0 * u - 1.0);
  }
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(ms)));
}

bool is_retryable(ErrorCode code) {
  return code == ErrorCode::ProviderUnreachable || code == ErrorCode::RateLimited ||
         code == ErrorCode::Timeout;
}

LlmClient::LlmClient(std::shared_ptr<ChatBackend> backend, RetryPolicy policy)
    : backend_(std::move(backend)), policy_(std::move(policy)) {
  if (!backend_) throw Error(ErrorCode::InvalidConfig, "LlmClient needs a backend");
  if (!policy_.sleep) policy_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Completion LlmClient::complete(const ChatRequest& request) const {
  request.validate();
  for (int attempt = 1;; ++attempt) {
    try {
      Completion c = backend_->send(request);
      c.attempts = attempt;
      return c;
    } catch (const Error& e) {
      if (!is_retryable(e.code()) || attempt > request.max_retries) throw;
      auto delay = policy_.delay_for(attempt);
      if (policy_.on_retry) policy_.on_retry(attempt, e.what(), delay);
      policy_.sleep(delay);
    }
  }
}

}  // namespace critics::llm
