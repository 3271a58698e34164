#pragma once

// Ask-parse-remind loop shared by the engines: a reply that does not parse is
// kept in the conversation and followed by a reminder, so the model sees what
// it got wrong.

#include <functional>
#include <optional>
#include <string>

#include "critics/error.hpp"
#include "critics/llm/chat.hpp"

namespace critics::detail {

/// Thrown by parse callbacks to request another attempt.
struct Unparsed {
  std::string why;
};

struct Speaker {
  const llm::LlmClient& client;
  std::string model;
  double temperature;
  std::optional<std::string> system;
};

/// `parse(reply, last_attempt)` returns the value or throws Unparsed. After
/// `attempts` unparseable replies, throws Error{fail} carrying the last reason.
template <typename Parse>
auto converse(const Speaker& who, std::string prompt, const std::function<std::string(const std::string&)>& reminder,
              int attempts, ErrorCode fail, const std::string& what, Parse&& parse)
    -> decltype(parse(std::string{}, false)) {
  llm::ChatRequest req;
  req.model = who.model;
  req.temperature = who.temperature;
  if (who.system) req.messages.push_back({llm::Role::System, *who.system});
  req.messages.push_back({llm::Role::User, std::move(prompt)});
  if (attempts < 1) attempts = 1;
  std::string why;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto reply = who.client.complete(req).content;
    try {
      return parse(reply, attempt == attempts);
    } catch (const Unparsed& u) {
      why = u.why;
      req.messages.push_back({llm::Role::Assistant, reply});
      req.messages.push_back({llm::Role::User, reminder(why)});
    }
  }
  throw Error(fail, what + " could not be parsed after " + std::to_string(attempts) + " attempts", why);
}

}  // namespace critics::detail
