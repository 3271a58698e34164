#include <httplib.h>

#include <chrono>
#include <cstdlib>

#include "critics/llm/chat.hpp"

namespace critics::llm {

HttpBackend::HttpBackend(ProviderConfig config) : config_(std::move(config)) {
  if (config_.timeout_ms <= 0) throw Error(ErrorCode::InvalidConfig, "timeout_ms must be positive");
  const auto& url = config_.endpoint_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || (url.compare(0, scheme_end, "http") != 0 && url.compare(0, scheme_end, "https") != 0))
    throw Error(ErrorCode::InvalidConfig, "endpoint_url must be http(s)://...", url);
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (scheme_host_port_.size() <= scheme_end + 3) throw Error(ErrorCode::InvalidConfig, "endpoint_url has no host", url);
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key)
      throw Error(ErrorCode::InvalidConfig, "environment variable " + config_.api_key_env + " is not set",
                  config_.api_key_env);
    api_key_ = key;
  }
}

nlohmann::json HttpBackend::request_body(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages)
    messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  return {{"model", request.model}, {"temperature", request.temperature}, {"messages", messages}};
}

std::string HttpBackend::extract_content(const std::string& body, const std::string& response_path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::MalformedProviderResponse, "provider response is not JSON", body.substr(0, 200));
  }
  try {
    const auto& v = doc.at(nlohmann::json::json_pointer(response_path));
    if (!v.is_string() || v.get<std::string>().empty())
      throw Error(ErrorCode::MalformedProviderResponse, "empty or non-string content at " + response_path);
    return v.get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::MalformedProviderResponse, "no content at " + response_path, body.substr(0, 200));
  }
}

Completion HttpBackend::send(const ChatRequest& request) {
  httplib::Client client(scheme_host_port_);
  auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto model = request.model.empty() ? config_.default_model : request.model;
  auto body = request_body(request);
  body["model"] = model;

  auto started = std::chrono::steady_clock::now();
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
  if (!res) {
    auto err = res.error();
    auto what = httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
      throw Error(ErrorCode::Timeout, "provider request timed out", what);
    throw Error(ErrorCode::ProviderUnreachable, "provider unreachable", what);
  }
  if (res->status == 429) throw Error(ErrorCode::RateLimited, "provider rate limit", res->body.substr(0, 200));
  if (res->status >= 500)
    throw Error(ErrorCode::ProviderUnreachable, "provider returned " + std::to_string(res->status), res->body.substr(0, 200));
  if (res->status < 200 || res->status >= 300)
    throw Error(ErrorCode::InvalidRequest, "provider returned " + std::to_string(res->status), res->body.substr(0, 200));

  Completion c;
  c.content = extract_content(res->body, config_.response_path);
  c.provider_id = id();
  c.latency_ms = elapsed.count();
  return c;
}

}  // namespace critics::llm
