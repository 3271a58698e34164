#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "critics/error.hpp"
#include "critics/session.hpp"

namespace httplib {
class Server;
}

namespace critics {

/// HTTP status for an error code: 404 missing, 409 state/version clashes,
/// 400 bad input, 500 everything else.
int http_status(ErrorCode code);
/// {code, message, detail}
nlohmann::json error_body(const Error& e);

/// Listing row for GET /sessions.
nlohmann::json session_summary(const Session& s);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  /// Built UI bundle served at "/"; a placeholder page when unset.
  std::optional<std::filesystem::path> ui_dir;
};

/// Session-service routes:
///   POST /sessions                        {stage, subject, config?, interaction?}
///   GET  /sessions
///   GET  /sessions/{id}/state?since=v     304 when v is current
///   GET  /sessions/{id}/events
///   GET  /sessions/{id}/export            canonical text
///   POST /sessions/{id}/advance           {expected_version?}
///   POST /sessions/{id}/critiques         {round, critique | suggestion, edit_of?, expected_version?}
///   POST /sessions/{id}/leader-decision   {round, decision, expected_version?}
///   POST /sessions/{id}/marks             {round, mark, actor, expected_version?}
///   GET  /metrics?ids=a,b                 user metrics over the listed (default: all) sessions
class ApiServer {
 public:
  ApiServer(SessionService& service, ServerOptions options);
  ~ApiServer();

  /// Throws Error{BindFailure}.
  void bind();
  int port() const { return port_; }
  /// Serves until stop(); bind() first.
  void run();
  void stop();

 private:
  void routes();

  SessionService& service_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = 0;
};

}  // namespace critics
