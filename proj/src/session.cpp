#include "critics/session.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <sstream>

#include "critics/agreement.hpp"
#include "critics/text_util.hpp"

namespace critics {

namespace fs = std::filesystem;

// ------------------------------------------------------------------ enums

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::AwaitingCritiques: return "awaiting_critiques";
    case SessionStatus::AwaitingLeader: return "awaiting_leader";
    case SessionStatus::Refining: return "refining";
    case SessionStatus::AwaitingAdvance: return "awaiting_advance";
    case SessionStatus::Evaluating: return "evaluating";
    case SessionStatus::Finalized: return "finalized";
    case SessionStatus::Failed: return "failed";
  }
  return "failed";
}

SessionStatus parse_session_status(std::string_view s) {
  for (auto v : {SessionStatus::AwaitingCritiques, SessionStatus::AwaitingLeader, SessionStatus::Refining,
                 SessionStatus::AwaitingAdvance, SessionStatus::Evaluating, SessionStatus::Finalized,
                 SessionStatus::Failed})
    if (to_string(v) == s) return v;
  throw Error(ErrorCode::ValidationError, "unknown session status '" + std::string(s) + "'");
}

std::string_view to_string(MarkValue m) {
  switch (m) {
    case MarkValue::Pass: return "pass";
    case MarkValue::Fail: return "fail";
    case MarkValue::Unmarked: return "unmarked";
  }
  return "unmarked";
}

MarkValue parse_mark_value(std::string_view s) {
  auto t = text::to_lower(s);
  if (t == "pass") return MarkValue::Pass;
  if (t == "fail") return MarkValue::Fail;
  if (t == "unmarked" || t.empty()) return MarkValue::Unmarked;
  throw Error(ErrorCode::ValidationError, "mark must be pass, fail or unmarked", std::string(s));
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Created: return "created";
    case EventKind::Advanced: return "advanced";
    case EventKind::CritiqueSubmitted: return "critique_submitted";
    case EventKind::CritiqueEdited: return "critique_edited";
    case EventKind::LeaderDecision: return "leader_decision";
    case EventKind::Marked: return "marked";
    case EventKind::Failed: return "failed";
  }
  return "failed";
}

namespace {

EventKind parse_event_kind(std::string_view s) {
  for (auto k : {EventKind::Created, EventKind::Advanced, EventKind::CritiqueSubmitted, EventKind::CritiqueEdited,
                 EventKind::LeaderDecision, EventKind::Marked, EventKind::Failed})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::StorageError, "unknown event kind '" + std::string(s) + "'");
}

std::string new_id() {
  static std::mutex mu;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(mu);
  std::uint64_t hi = gen(), lo = gen();
  hi = (hi & 0xffffffffffff0fffULL) | 0x0000000000004000ULL;  // version 4
  lo = (lo & 0x3fffffffffffffffULL) | 0x8000000000000000ULL;  // RFC 4122 variant
  char buf[37];
  std::snprintf(buf, sizeof buf, "%08x-%04x-%04x-%04x-%012llx", static_cast<unsigned>(hi >> 32),
                static_cast<unsigned>((hi >> 16) & 0xffff), static_cast<unsigned>(hi & 0xffff),
                static_cast<unsigned>(lo >> 48), static_cast<unsigned long long>(lo & 0xffffffffffffULL));
  return buf;
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool valid_id(const std::string& id) {
  return !id.empty() && id.size() <= 64 &&
         std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; });
}

void write_all(int fd, const std::string& data, const fs::path& p) {
  std::size_t off = 0;
  while (off < data.size()) {
    auto n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      ::close(fd);
      throw Error(ErrorCode::StorageError, "write failed", p.string());
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw Error(ErrorCode::StorageError, "fsync failed", p.string());
  }
  ::close(fd);
}

void fsync_dir(const fs::path& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

StoryPackage current_plan(const Session& s) { return s.candidates.empty() ? *s.package : s.candidates.back(); }

StoryText current_story(const Session& s) {
  int done = s.completed_rounds();
  return done > 0 ? s.text_rounds[done - 1].output : *s.story;
}

std::set<int> revised_ordinals(const Session& s) {
  std::set<int> out;
  for (int i = 0; i < s.completed_rounds(); ++i) out.insert(s.text_rounds[i].target.ordinal);
  return out;
}

/// Whether round `r` (1-based, completed) changed its input.
bool round_changed(const Session& s, int r) {
  if (s.stage == Stage::Plan) {
    const auto& rec = s.plan_rounds.at(r - 1);
    return render_story_package(rec.input_plan) != render_story_package(rec.refined_plan);
  }
  const auto& before = r == 1 ? *s.story : s.text_rounds.at(r - 2).output;
  return before.body != s.text_rounds.at(r - 1).output.body;
}

void require_human(const Author& a, const char* what) {
  if (!a.is_human()) throw Error(ErrorCode::ValidationError, std::string(what) + " must come from a human actor");
}

void require_open_round(const Session& s, int round) {
  if (!s.round_open()) throw Error(ErrorCode::IllegalState, "no round is waiting for input", std::string(to_string(s.status)));
  if (round != s.current_round())
    throw Error(ErrorCode::UnknownRound, "round " + std::to_string(round) + " is not the open round",
                std::to_string(s.current_round()));
}

}  // namespace

// --------------------------------------------------------------- session

int Session::completed_rounds() const {
  int n = static_cast<int>(stage == Stage::Plan ? plan_rounds.size() : text_rounds.size());
  return round_open() ? n - 1 : n;
}

std::string Session::export_text() const {
  if (stage == Stage::Plan) {
    if (status == SessionStatus::Finalized && selected_index < static_cast<int>(candidates.size()))
      return render_story_package(candidates[selected_index]);
    return render_story_package(current_plan(*this));
  }
  auto body = current_story(*this).body;
  if (!body.empty() && body.back() != '\n') body += '\n';
  return body;
}

void to_json(nlohmann::json& j, const HumanMark& m) {
  j = {{"round", m.round},
       {"edited", to_string(m.edited)},
       {"accepted", to_string(m.accepted)},
       {"annotator", m.annotator},
       {"auto_edited", m.auto_edited ? "pass" : "fail"}};
}

void from_json(const nlohmann::json& j, HumanMark& m) {
  m.round = j.value("round", 0);
  m.edited = parse_mark_value(j.value("edited", std::string("unmarked")));
  m.accepted = parse_mark_value(j.value("accepted", std::string("unmarked")));
  m.annotator = j.value("annotator", std::string());
  m.auto_edited = j.value("auto_edited", std::string("fail")) == "pass";
}

void to_json(nlohmann::json& j, const Interaction& i) {
  j = {{"human_leader", i.human_leader}, {"human_critic", i.human_critic}};
}

void from_json(const nlohmann::json& j, Interaction& i) {
  i.human_leader = j.value("human_leader", false);
  i.human_critic = j.value("human_critic", false);
}

void to_json(nlohmann::json& j, const Session& s) {
  j = {{"id", s.id},
       {"stage", to_string(s.stage)},
       {"status", to_string(s.status)},
       {"version", s.version},
       {"interaction", s.interaction},
       {"round", s.current_round()},
       {"completed_rounds", s.completed_rounds()},
       {"human_marks", s.human_marks},
       {"diagnostic", s.diagnostic}};
  if (s.stage == Stage::Plan) {
    j["config"] = s.plan_config;
    j["subject"] = *s.package;
    j["personas"] = s.personas ? nlohmann::json(*s.personas) : nlohmann::json(nullptr);
    j["rounds"] = s.plan_rounds;
    j["candidates"] = s.candidates;
    j["selected_index"] = s.selected_index;
    j["evaluator_transcript"] = s.evaluator_transcript;
    j["pending"] = s.pending_critiques;
  } else {
    j["config"] = s.text_config;
    j["subject"] = *s.story;
    j["rounds"] = s.text_rounds;
    j["pending"] = s.pending_suggestions;
  }
}

void from_json(const nlohmann::json& j, Session& s) {
  s = Session{};
  s.id = j.at("id").get<std::string>();
  s.stage = parse_stage(j.at("stage").get<std::string>());
  s.status = parse_session_status(j.at("status").get<std::string>());
  s.version = j.at("version").get<std::int64_t>();
  s.interaction = j.at("interaction").get<Interaction>();
  s.human_marks = j.at("human_marks").get<std::vector<HumanMark>>();
  s.diagnostic = j.value("diagnostic", std::string());
  if (s.stage == Stage::Plan) {
    s.plan_config = j.at("config").get<CrPlanConfig>();
    s.package = j.at("subject").get<StoryPackage>();
    if (!j.at("personas").is_null()) s.personas = j.at("personas").get<PersonaSet>();
    s.plan_rounds = j.at("rounds").get<std::vector<RoundRecord>>();
    s.candidates = j.at("candidates").get<std::vector<StoryPackage>>();
    s.selected_index = j.at("selected_index").get<int>();
    s.evaluator_transcript = j.at("evaluator_transcript").get<std::string>();
    s.pending_critiques = j.at("pending").get<std::vector<Critique>>();
  } else {
    s.text_config = j.at("config").get<CrTextConfig>();
    s.story = j.at("subject").get<StoryText>();
    s.text_rounds = j.at("rounds").get<std::vector<CrTextRound>>();
    s.pending_suggestions = j.at("pending").get<std::vector<RevisionSuggestion>>();
  }
}

void to_json(nlohmann::json& j, const SessionEvent& e) {
  j = {{"session_id", e.session_id}, {"version", e.version}, {"kind", to_string(e.kind)},
       {"round", e.round},           {"actor", e.actor},     {"payload", e.payload},
       {"patch", e.patch},           {"at_ms", e.at_ms}};
}

void from_json(const nlohmann::json& j, SessionEvent& e) {
  e.session_id = j.at("session_id").get<std::string>();
  e.version = j.at("version").get<std::int64_t>();
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  e.round = j.value("round", 0);
  e.actor = j.at("actor").get<Author>();
  e.payload = j.value("payload", nlohmann::json());
  e.patch = j.at("patch");
  e.at_ms = j.value("at_ms", std::int64_t{0});
}

// ------------------------------------------------------------------ store

SessionStore::SessionStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_))
    throw Error(ErrorCode::StorageError, "cannot create data directory", dir_.string());
}

void SessionStore::append(const SessionEvent& e) const {
  auto p = dir_ / (e.session_id + ".events.jsonl");
  int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error(ErrorCode::StorageError, "cannot open event log", p.string());
  write_all(fd, nlohmann::json(e).dump() + "\n", p);
  if (e.version == 1) fsync_dir(dir_);
}

void SessionStore::write_snapshot(const Session& s) const {
  auto p = dir_ / (s.id + ".json");
  auto tmp = dir_ / (s.id + ".json.tmp");
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error(ErrorCode::StorageError, "cannot write snapshot", tmp.string());
  write_all(fd, nlohmann::json(s).dump(2) + "\n", tmp);
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) throw Error(ErrorCode::StorageError, "cannot replace snapshot", p.string());
  fsync_dir(dir_);
}

std::vector<SessionEvent> SessionStore::events(const std::string& id) const {
  if (!valid_id(id)) throw Error(ErrorCode::NotFound, "no session '" + id + "'", id);
  auto p = dir_ / (id + ".events.jsonl");
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "no session '" + id + "'", id);
  std::vector<SessionEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    bool last = in.peek() == std::char_traits<char>::eof();
    try {
      out.push_back(nlohmann::json::parse(line).get<SessionEvent>());
    } catch (const std::exception& ex) {
      if (last) break;  // torn tail from an interrupted append
      throw Error(ErrorCode::StorageError, std::string("corrupt event log: ") + ex.what(), p.string());
    }
  }
  return out;
}

Session SessionStore::load(const std::string& id) const {
  auto evs = events(id);
  if (evs.empty()) throw Error(ErrorCode::NotFound, "session '" + id + "' has no events", id);
  nlohmann::json state = nlohmann::json::object();
  std::int64_t expect = 1;
  for (const auto& e : evs) {
    if (e.version != expect)
      throw Error(ErrorCode::StorageError, "event log skips from version " + std::to_string(expect - 1), id);
    try {
      state = state.patch(e.patch);
    } catch (const std::exception& ex) {
      throw Error(ErrorCode::StorageError, std::string("event does not apply: ") + ex.what(), id);
    }
    ++expect;
  }
  try {
    return state.get<Session>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& ex) {
    throw Error(ErrorCode::StorageError, std::string("replayed state is not a session: ") + ex.what(), id);
  }
}

std::vector<std::string> SessionStore::ids() const {
  std::vector<std::string> out;
  const std::string suffix = ".events.jsonl";
  for (const auto& entry : fs::directory_iterator(dir_)) {
    auto name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      out.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- metrics

UserMetrics compute_user_metrics(const std::vector<Session>& sessions) {
  UserMetrics m;
  std::size_t edited = 0, passes = 0;
  std::vector<std::vector<int>> counts;  // per round: {pass, fail}
  for (const auto& s : sessions) {
    for (int r = 1; r <= s.completed_rounds(); ++r) {
      ++m.rounds;
      edited += round_changed(s, r);
      std::vector<int> row{0, 0};
      for (const auto& mark : s.human_marks) {
        if (mark.round != r || mark.accepted == MarkValue::Unmarked) continue;
        ++(mark.accepted == MarkValue::Pass ? row[0] : row[1]);
      }
      if (row[0] + row[1] == 0)
        throw Error(ErrorCode::UnmarkedRounds, "round " + std::to_string(r) + " of session " + s.id + " has no Accepted mark",
                    s.id + "#" + std::to_string(r));
      passes += row[0];
      m.accepted_marks += row[0] + row[1];
      counts.push_back(row);
    }
  }
  if (m.rounds == 0) throw Error(ErrorCode::EmptyInput, "no completed rounds to score");
  m.edited_pass_rate = 100.0 * static_cast<double>(edited) / static_cast<double>(m.rounds);
  m.accepted_pass_rate = 100.0 * static_cast<double>(passes) / static_cast<double>(m.accepted_marks);
  int raters = counts[0][0] + counts[0][1];
  bool uniform = std::all_of(counts.begin(), counts.end(), [&](const auto& r) { return r[0] + r[1] == raters; });
  if (uniform && raters >= 2) m.fleiss = fleiss_kappa(counts);
  return m;
}

void to_json(nlohmann::json& j, const UserMetrics& m) {
  auto r2 = [](double x) { return std::round(x * 100.0) / 100.0; };
  j = {{"edited_pass_rate", r2(m.edited_pass_rate)},
       {"accepted_pass_rate", r2(m.accepted_pass_rate)},
       {"fleiss", m.fleiss ? nlohmann::json(*m.fleiss) : nlohmann::json(nullptr)},
       {"rounds", m.rounds},
       {"accepted_marks", m.accepted_marks}};
}

// ---------------------------------------------------------------- service

SessionService::SessionService(const llm::LlmClient& client, fs::path data_dir, const llm::PromptCatalog& prompts)
    : client_(client), prompts_(prompts), store_(std::move(data_dir)) {
  for (const auto& id : store_.ids()) {
    auto slot = std::make_shared<Slot>();
    slot->state = store_.load(id);
    auto evs = store_.events(id);
    slot->last_at = evs.empty() ? 0 : evs.back().at_ms;
    slots_[id] = std::move(slot);
  }
}

std::shared_ptr<SessionService::Slot> SessionService::slot(const std::string& id) const {
  std::lock_guard lock(map_mu_);
  auto it = slots_.find(id);
  if (it == slots_.end()) throw Error(ErrorCode::NotFound, "no session '" + id + "'", id);
  return it->second;
}

Session SessionService::commit(Slot& slot, const Session& before, Session after, EventKind kind, int round,
                               const Author& actor, nlohmann::json payload) {
  after.version = before.version + 1;
  SessionEvent e;
  e.session_id = after.id;
  e.version = after.version;
  e.kind = kind;
  e.round = round;
  e.actor = actor;
  e.payload = std::move(payload);
  nlohmann::json prev = before.version == 0 ? nlohmann::json::object() : nlohmann::json(before);
  e.patch = nlohmann::json::diff(prev, nlohmann::json(after));
  e.at_ms = std::max(now_ms(), slot.last_at);
  store_.append(e);  // the log is the source of truth; the snapshot follows
  store_.write_snapshot(after);
  slot.last_at = e.at_ms;
  slot.state = after;
  return after;
}

Session SessionService::mutate(const std::string& id, std::optional<std::int64_t> expected_version, EventKind kind,
                               int round, const Author& actor, nlohmann::json payload,
                               const std::function<void(Session&)>& fn) {
  auto s = slot(id);
  std::lock_guard lock(s->mu);
  if (s->busy) throw Error(ErrorCode::Conflict, "session is being advanced", id);
  if (expected_version && *expected_version != s->state.version)
    throw Error(ErrorCode::Conflict, "session has moved on", std::to_string(s->state.version));
  Session after = s->state;
  fn(after);
  return commit(*s, s->state, std::move(after), kind, round, actor, std::move(payload));
}

Session SessionService::create_session(Stage stage, const nlohmann::json& config, const std::string& subject,
                                       Interaction interaction) {
  Session s;
  s.id = new_id();
  s.stage = stage;
  s.interaction = interaction;
  const auto& cfg = config.is_null() ? nlohmann::json::object() : config;
  try {
    if (stage == Stage::Plan) {
      s.plan_config = cfg.get<CrPlanConfig>();
      s.plan_config.validate();
      s.package = parse_story_package(subject);
      validate(*s.package);
      s.candidates.push_back(*s.package);
    } else {
      s.text_config = cfg.get<CrTextConfig>();
      s.text_config.validate();
      s.story = segment_sentences(subject);
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::ValidationError, e.what(), std::string(to_string(e.code())));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("bad config: ") + e.what(), "InvalidConfig");
  }
  s.status = SessionStatus::AwaitingCritiques;

  auto slot = std::make_shared<Slot>();
  nlohmann::json payload = {{"stage", to_string(stage)}};
  auto out = commit(*slot, Session{}, std::move(s), EventKind::Created, 0, Author::human("api"), payload);
  std::lock_guard lock(map_mu_);
  slots_[out.id] = slot;
  return out;
}

Session SessionService::advance(const std::string& id, std::optional<std::int64_t> expected_version) {
  auto s = slot(id);
  Session before;
  {
    std::lock_guard lock(s->mu);
    if (s->busy) throw Error(ErrorCode::Conflict, "session is already being advanced", id);
    if (expected_version && *expected_version != s->state.version)
      throw Error(ErrorCode::Conflict, "session has moved on", std::to_string(s->state.version));
    const auto& st = s->state;
    if (st.status == SessionStatus::Finalized || st.status == SessionStatus::Failed)
      throw Error(ErrorCode::IllegalState, "session is " + std::string(to_string(st.status)), id);
    if (st.status == SessionStatus::AwaitingLeader && st.interaction.human_leader &&
        !(st.stage == Stage::Text && !st.text_config.use_leader))
      throw Error(ErrorCode::IllegalState, "waiting for a human leader decision", id);
    s->busy = true;
    before = st;
  }
  struct Release {
    Slot& s;
    ~Release() {
      std::lock_guard lock(s.mu);
      s.busy = false;
    }
  } release{*s};

  // Engine work runs without the lock so readers see the last committed state.
  Session after = before;
  EventKind kind = EventKind::Advanced;
  try {
    after = run_machine_steps(before);
  } catch (const Error& e) {
    after = before;
    after.status = SessionStatus::Failed;
    after.diagnostic = std::string(to_string(e.code())) + ": " + e.what();
    kind = EventKind::Failed;
  }
  std::lock_guard lock(s->mu);
  nlohmann::json payload = {{"from", to_string(before.status)}, {"to", to_string(after.status)}};
  return commit(*s, before, std::move(after), kind, before.current_round(), Author::machine("engine"), payload);
}

Session SessionService::run_machine_steps(Session s) const {
  if (s.stage == Stage::Plan) {
    plan_steps(s);
  } else {
    text_steps(s);
  }
  return s;
}

void SessionService::plan_steps(Session& s) const {
  PlanEngine engine(client_, s.plan_config, prompts_);
  const auto& cfg = s.plan_config;
  auto leader = [&]() -> const Persona* { return s.personas ? &s.personas->leader : nullptr; };
  for (;;) {
    switch (s.status) {
      case SessionStatus::AwaitingCritiques:
      case SessionStatus::AwaitingAdvance: {
        if (s.completed_rounds() >= s.total_rounds()) {
          s.status = SessionStatus::Evaluating;
          break;
        }
        if (cfg.use_personas && !s.personas) s.personas = engine.create_personas(*s.package);
        RoundRecord rec;
        rec.round = s.current_round();
        rec.input_plan = current_plan(s);
        rec.critiques = engine.generate_critiques(s.personas ? &*s.personas : nullptr, rec.input_plan);
        rec.critiques.insert(rec.critiques.end(), s.pending_critiques.begin(), s.pending_critiques.end());
        s.pending_critiques.clear();
        s.plan_rounds.push_back(std::move(rec));
        s.status = SessionStatus::AwaitingLeader;
        if (s.interaction.human_leader || s.interaction.human_critic) return;
        break;
      }
      case SessionStatus::AwaitingLeader: {
        auto& rec = s.plan_rounds.back();
        rec.decision = cfg.use_leader ? engine.leader_select(rec.critiques, rec.input_plan, leader())
                                      : PlanEngine::leaderless_decision();
        s.status = SessionStatus::Refining;
        break;
      }
      case SessionStatus::Refining: {
        auto& rec = s.plan_rounds.back();
        std::tie(rec.refined_plan, rec.applied) = engine.apply(rec.input_plan, rec.critiques, rec.decision);
        s.candidates.push_back(rec.refined_plan);
        s.status = SessionStatus::AwaitingAdvance;
        if (s.completed_rounds() >= s.total_rounds()) {
          s.status = SessionStatus::Evaluating;
          break;
        }
        if (s.interaction.human_critic) s.status = SessionStatus::AwaitingCritiques;
        return;
      }
      case SessionStatus::Evaluating: {
        std::tie(s.selected_index, s.evaluator_transcript) = engine.evaluate_candidates(s.candidates, s.package->premise);
        s.status = SessionStatus::Finalized;
        return;
      }
      case SessionStatus::Finalized:
      case SessionStatus::Failed:
        return;
    }
  }
}

void SessionService::text_steps(Session& s) const {
  TextEngine engine(client_, s.text_config, prompts_);
  const auto& cfg = s.text_config;
  for (;;) {
    switch (s.status) {
      case SessionStatus::AwaitingCritiques:
      case SessionStatus::AwaitingAdvance: {
        if (s.completed_rounds() >= s.total_rounds()) {
          s.status = SessionStatus::Finalized;
          return;
        }
        auto rec = engine.propose(current_story(s), s.current_round(), revised_ordinals(s));
        rec.extra.insert(rec.extra.end(), s.pending_suggestions.begin(), s.pending_suggestions.end());
        s.pending_suggestions.clear();
        bool done = rec.decision.synthetic;  // leaderless: the chain already applied everything
        s.text_rounds.push_back(std::move(rec));
        if (done) {
          s.status = SessionStatus::Refining;
          break;
        }
        s.status = SessionStatus::AwaitingLeader;
        if (s.interaction.human_leader || s.interaction.human_critic) return;
        break;
      }
      case SessionStatus::AwaitingLeader: {
        auto& rec = s.text_rounds.back();
        auto story = current_story(s);
        rec.decision = engine.leader_select_revision(rec.suggestions(),
                                                     context_window(story, rec.target, cfg.context_window));
        s.status = SessionStatus::Refining;
        break;
      }
      case SessionStatus::Refining: {
        auto& rec = s.text_rounds.back();
        // current_story() still points at the previous output while the round is open.
        engine.finish(current_story(s), rec);
        s.status = SessionStatus::AwaitingAdvance;
        if (s.completed_rounds() >= s.total_rounds()) {
          s.status = SessionStatus::Finalized;
          return;
        }
        if (s.interaction.human_critic) s.status = SessionStatus::AwaitingCritiques;
        return;
      }
      case SessionStatus::Evaluating:
        s.status = SessionStatus::Finalized;
        return;
      case SessionStatus::Finalized:
      case SessionStatus::Failed:
        return;
    }
  }
}

Session SessionService::submit_critique(const std::string& id, int round, Critique critique, std::optional<int> edit_of,
                                        std::optional<std::int64_t> expected_version) {
  require_human(critique.author, "submitted critiques");
  if (text::trim(critique.question).empty())
    throw Error(ErrorCode::ValidationError, "critique question is empty", "question");
  if (critique.criterion_id.empty()) critique.criterion_id = "human";
  auto kind = edit_of ? EventKind::CritiqueEdited : EventKind::CritiqueSubmitted;
  nlohmann::json payload = {{"critique", critique}};
  if (edit_of) payload["edit_of"] = *edit_of;
  return mutate(id, expected_version, kind, round, critique.author, payload, [&](Session& s) {
    if (s.stage != Stage::Plan) throw Error(ErrorCode::ValidationError, "text sessions take revision suggestions");
    if (s.status == SessionStatus::AwaitingCritiques) {
      if (round != s.current_round())
        throw Error(ErrorCode::UnknownRound, "round " + std::to_string(round) + " is not the next round",
                    std::to_string(s.current_round()));
      if (edit_of) throw Error(ErrorCode::IndexOutOfRange, "no machine critiques exist yet to edit");
      s.pending_critiques.push_back(critique);
      return;
    }
    require_open_round(s, round);
    if (s.status != SessionStatus::AwaitingLeader)
      throw Error(ErrorCode::IllegalState, "the leader has already decided this round");
    auto& list = s.plan_rounds.back().critiques;
    if (edit_of) {
      if (*edit_of < 0 || *edit_of >= static_cast<int>(list.size()))
        throw Error(ErrorCode::IndexOutOfRange, "no critique " + std::to_string(*edit_of) + " to edit");
      critique.edited_from = *edit_of;
    }
    list.push_back(critique);
  });
}

Session SessionService::submit_suggestion(const std::string& id, int round, RevisionSuggestion suggestion,
                                          std::optional<std::int64_t> expected_version) {
  require_human(suggestion.author, "submitted suggestions");
  if (text::trim(suggestion.replacement).empty())
    throw Error(ErrorCode::ValidationError, "suggested revision is empty", "replacement");
  if (suggestion.criterion_id.empty()) suggestion.criterion_id = "human";
  nlohmann::json payload = {{"suggestion", suggestion}};
  return mutate(id, expected_version, EventKind::CritiqueSubmitted, round, suggestion.author, payload,
                [&](Session& s) {
                  if (s.stage != Stage::Text) throw Error(ErrorCode::ValidationError, "plan sessions take critiques");
                  if (s.status == SessionStatus::AwaitingCritiques) {
                    if (round != s.current_round())
                      throw Error(ErrorCode::UnknownRound, "round " + std::to_string(round) + " is not the next round");
                    s.pending_suggestions.push_back(suggestion);
                    return;
                  }
                  require_open_round(s, round);
                  if (s.status != SessionStatus::AwaitingLeader)
                    throw Error(ErrorCode::IllegalState, "the leader has already decided this round");
                  auto& rec = s.text_rounds.back();
                  suggestion.original = std::string(current_story(s).sentence(rec.target));
                  rec.extra.push_back(suggestion);
                });
}

Session SessionService::submit_leader_decision(const std::string& id, int round, LeaderDecision decision,
                                               std::optional<std::int64_t> expected_version) {
  require_human(decision.author, "leader decisions");
  decision.synthetic = false;
  nlohmann::json payload = {{"decision", decision}};
  return mutate(id, expected_version, EventKind::LeaderDecision, round, decision.author, payload, [&](Session& s) {
    require_open_round(s, round);
    if (s.status != SessionStatus::AwaitingLeader)
      throw Error(ErrorCode::IllegalState, "the leader has already decided this round");
    int n = s.stage == Stage::Plan ? static_cast<int>(s.plan_rounds.back().critiques.size())
                                   : static_cast<int>(s.text_rounds.back().suggestions().size());
    if (decision.chosen_index < 0 || decision.chosen_index >= n)
      throw Error(ErrorCode::IndexOutOfRange,
                  "index " + std::to_string(decision.chosen_index) + " addresses none of the " + std::to_string(n) +
                      " candidates",
                  std::to_string(decision.chosen_index));
    if (s.stage == Stage::Plan) {
      s.plan_rounds.back().decision = decision;
    } else {
      s.text_rounds.back().decision = decision;
    }
    s.status = SessionStatus::Refining;
  });
}

Session SessionService::mark_round(const std::string& id, int round, HumanMark mark, const Author& actor,
                                   std::optional<std::int64_t> expected_version) {
  if (mark.accepted != MarkValue::Unmarked) require_human(actor, "Accepted marks");
  mark.round = round;
  if (mark.annotator.empty()) mark.annotator = actor.name;
  nlohmann::json payload = {{"mark", mark}};
  return mutate(id, expected_version, EventKind::Marked, round, actor, payload, [&](Session& s) {
    if (round < 1 || round > std::max(s.total_rounds(), s.completed_rounds()))
      throw Error(ErrorCode::UnknownRound, "session has no round " + std::to_string(round), std::to_string(round));
    if (round > s.completed_rounds())
      throw Error(ErrorCode::RoundIncomplete, "round " + std::to_string(round) + " is not complete",
                  std::to_string(round));
    mark.auto_edited = round_changed(s, round);
    auto same = [&](const HumanMark& m) { return m.round == round && m.annotator == mark.annotator; };
    auto it = std::find_if(s.human_marks.begin(), s.human_marks.end(), same);
    if (it != s.human_marks.end()) {
      *it = mark;
    } else {
      s.human_marks.push_back(mark);
    }
  });
}

Session SessionService::get_state(const std::string& id) const {
  auto s = slot(id);
  std::lock_guard lock(s->mu);
  return s->state;
}

std::vector<Session> SessionService::list() const {
  std::vector<std::shared_ptr<Slot>> all;
  {
    std::lock_guard lock(map_mu_);
    for (const auto& [_, s] : slots_) all.push_back(s);
  }
  std::vector<Session> out;
  for (const auto& s : all) {
    std::lock_guard lock(s->mu);
    out.push_back(s->state);
  }
  return out;
}

bool SessionService::busy(const std::string& id) const {
  auto s = slot(id);
  std::lock_guard lock(s->mu);
  return s->busy;
}

}  // namespace critics
