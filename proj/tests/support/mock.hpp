#pragma once

#include <memory>
#include <vector>

#include "critics/error.hpp"
#include "critics/llm/chat.hpp"
#include "critics/llm/mock_backend.hpp"

// A mock-backed client with retries that never sleep.
struct MockRig {
  std::shared_ptr<critics::llm::MockBackend> backend;
  critics::llm::LlmClient client;

  explicit MockRig(std::vector<critics::llm::MockEntry> script)
      : backend(std::make_shared<critics::llm::MockBackend>(std::move(script))),
        client(backend, quiet_policy()) {}

  /// For code paths that must not call the model; calls() shows any that did.
  static std::vector<critics::llm::MockEntry> silent() {
    return {critics::llm::MockEntry::always(critics::llm::MockResponse::reply("unexpected call"), -1)};
  }

  static critics::llm::RetryPolicy quiet_policy() {
    critics::llm::RetryPolicy p;
    p.sleep = [](std::chrono::milliseconds) {};
    return p;
  }
};

template <typename Fn>
critics::ErrorCode error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const critics::Error& e) {
    return e.code();
  }
  return critics::ErrorCode::InvalidConfig;  // sentinel: nothing was thrown
}
