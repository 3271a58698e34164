#include "critics/http_api.hpp"

#include <httplib.h>

#include "critics/text_util.hpp"

namespace critics {

namespace {

const char* kPlaceholder = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>critics</title></head>
<body>
<h1>critics session service</h1>
<p>No UI bundle is mounted. Start the server with <code>--ui-dir</code> to serve one.
The JSON API lives under <code>/sessions</code>.</p>
</body></html>
)";

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) { send_json(res, http_status(e.code()), error_body(e)); }

nlohmann::json body_of(const httplib::Request& req) {
  if (text::trim(req.body).empty()) return nlohmann::json::object();
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::ValidationError, "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ValidationError, "request body is not valid JSON", e.what());
  }
}

std::optional<std::int64_t> expected_version(const nlohmann::json& j) {
  if (!j.contains("expected_version") || j.at("expected_version").is_null()) return std::nullopt;
  return j.at("expected_version").get<std::int64_t>();
}

int round_of(const nlohmann::json& j) {
  if (!j.contains("round") || !j.at("round").is_number_integer())
    throw Error(ErrorCode::ValidationError, "field 'round' (integer) is required", "round");
  return j.at("round").get<int>();
}

const nlohmann::json& field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name) || !j.at(name).is_object())
    throw Error(ErrorCode::ValidationError, std::string("field '") + name + "' (object) is required", name);
  return j.at(name);
}

/// Runs `fn`, mapping library and JSON errors onto the error body.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const nlohmann::json::exception& e) {
    send_error(res, Error(ErrorCode::ValidationError, "malformed request field", e.what()));
  } catch (const std::exception& e) {
    send_error(res, Error(ErrorCode::StorageError, e.what()));
  }
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound:
    case ErrorCode::UnknownRound:
      return 404;
    case ErrorCode::Conflict:
    case ErrorCode::IllegalState:
      return 409;
    case ErrorCode::ValidationError:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::RoundIncomplete:
    case ErrorCode::UnmarkedRounds:
    case ErrorCode::EmptyInput:
    case ErrorCode::InvalidConfig:
    case ErrorCode::MissingSection:
    case ErrorCode::OutlineParseError:
    case ErrorCode::InvalidPackage:
    case ErrorCode::EmptyText:
      return 400;
    default:
      return 500;
  }
}

nlohmann::json error_body(const Error& e) {
  return {{"code", to_string(e.code())}, {"message", e.what()}, {"detail", e.detail()}};
}

nlohmann::json session_summary(const Session& s) {
  return {{"id", s.id},
          {"stage", to_string(s.stage)},
          {"status", to_string(s.status)},
          {"version", s.version},
          {"round", s.current_round()},
          {"completed_rounds", s.completed_rounds()},
          {"total_rounds", s.total_rounds()}};
}

ApiServer::ApiServer(SessionService& service, ServerOptions options)
    : service_(service), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  // httplib's default also sets SO_REUSEPORT, which lets a second server share the port silently.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::bind() {
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
    if (port_ <= 0) throw Error(ErrorCode::BindFailure, "cannot bind any port", options_.host);
    return;
  }
  if (!server_->bind_to_port(options_.host, options_.port))
    throw Error(ErrorCode::BindFailure, "cannot bind " + options_.host + ":" + std::to_string(options_.port),
                std::to_string(options_.port));
  port_ = options_.port;
}

void ApiServer::run() { server_->listen_after_bind(); }

void ApiServer::stop() {
  if (server_) server_->stop();
}

void ApiServer::routes() {
  auto& svc = service_;
  auto& srv = *server_;

  srv.Post("/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto j = body_of(req);
      if (!j.contains("subject") || !j.at("subject").is_string())
        throw Error(ErrorCode::ValidationError, "field 'subject' (text) is required", "subject");
      auto stage = parse_stage(j.value("stage", std::string("plan")));
      auto interaction = j.contains("interaction") ? j.at("interaction").get<Interaction>() : Interaction{};
      auto s = svc.create_session(stage, j.value("config", nlohmann::json::object()),
                                  j.at("subject").get<std::string>(), interaction);
      send_json(res, 201, s);
    });
  });

  srv.Get("/sessions", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      auto all = nlohmann::json::array();
      for (const auto& s : svc.list()) all.push_back(session_summary(s));
      send_json(res, 200, all);
    });
  });

  srv.Get(R"(/sessions/([A-Za-z0-9-]+)/state)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto s = svc.get_state(req.matches[1]);
      if (req.has_param("since")) {
        std::int64_t since = 0;
        try {
          since = std::stoll(req.get_param_value("since"));
        } catch (const std::exception&) {
          throw Error(ErrorCode::ValidationError, "'since' must be an integer version", "since");
        }
        if (since >= s.version) {
          res.status = 304;
          return;
        }
      }
      auto j = nlohmann::json(s);
      j["busy"] = svc.busy(s.id);
      send_json(res, 200, j);
    });
  });

  srv.Get(R"(/sessions/([A-Za-z0-9-]+)/events)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      svc.get_state(req.matches[1]);  // NotFound for unknown ids
      auto all = nlohmann::json::array();
      for (const auto& e : svc.store().events(req.matches[1])) {
        nlohmann::json j = e;
        j.erase("patch");
        all.push_back(std::move(j));
      }
      send_json(res, 200, all);
    });
  });

  srv.Get(R"(/sessions/([A-Za-z0-9-]+)/export)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto s = svc.get_state(req.matches[1]);
      res.status = 200;
      res.set_content(s.export_text(), "text/plain; charset=utf-8");
    });
  });

  srv.Post(R"(/sessions/([A-Za-z0-9-]+)/advance)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto j = body_of(req);
      send_json(res, 200, svc.advance(req.matches[1], expected_version(j)));
    });
  });

  srv.Post(R"(/sessions/([A-Za-z0-9-]+)/critiques)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto j = body_of(req);
      auto id = std::string(req.matches[1]);
      auto round = round_of(j);
      if (j.contains("suggestion")) {
        auto s = field(j, "suggestion").get<RevisionSuggestion>();
        send_json(res, 200, svc.submit_suggestion(id, round, s, expected_version(j)));
        return;
      }
      auto c = field(j, "critique").get<Critique>();
      std::optional<int> edit_of;
      if (j.contains("edit_of") && !j.at("edit_of").is_null()) edit_of = j.at("edit_of").get<int>();
      send_json(res, 200, svc.submit_critique(id, round, c, edit_of, expected_version(j)));
    });
  });

  srv.Post(R"(/sessions/([A-Za-z0-9-]+)/leader-decision)",
           [&svc](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               auto j = body_of(req);
               auto d = field(j, "decision").get<LeaderDecision>();
               send_json(res, 200, svc.submit_leader_decision(req.matches[1], round_of(j), d, expected_version(j)));
             });
           });

  srv.Post(R"(/sessions/([A-Za-z0-9-]+)/marks)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto j = body_of(req);
      auto mark = field(j, "mark").get<HumanMark>();
      auto actor = j.contains("actor") ? j.at("actor").get<Author>() : Author::human(mark.annotator);
      send_json(res, 200, svc.mark_round(req.matches[1], round_of(j), mark, actor, expected_version(j)));
    });
  });

  srv.Get("/metrics", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::vector<Session> chosen;
      if (req.has_param("ids")) {
        for (const auto& id : text::split(req.get_param_value("ids"), ','))
          if (!text::trim(id).empty()) chosen.push_back(svc.get_state(std::string(text::trim(id))));
      } else {
        chosen = svc.list();
      }
      send_json(res, 200, compute_user_metrics(chosen));
    });
  });

  if (options_.ui_dir) {
    if (!srv.set_mount_point("/", options_.ui_dir->string()))
      throw Error(ErrorCode::InvalidConfig, "UI directory does not exist", options_.ui_dir->string());
  } else {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholder, "text/html; charset=utf-8");
    });
  }
}

}  // namespace critics
