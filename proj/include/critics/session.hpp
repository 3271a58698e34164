#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "critics/crplan.hpp"
#include "critics/crtext.hpp"
#include "critics/stage.hpp"

namespace critics {

enum class SessionStatus {
  AwaitingCritiques,
  AwaitingLeader,
  Refining,
  AwaitingAdvance,
  Evaluating,
  Finalized,
  Failed,
};

std::string_view to_string(SessionStatus s);
SessionStatus parse_session_status(std::string_view s);

enum class MarkValue { Pass, Fail, Unmarked };

std::string_view to_string(MarkValue m);
MarkValue parse_mark_value(std::string_view s);

struct HumanMark {
  int round = 0;
  MarkValue edited = MarkValue::Unmarked;  // the annotator's own Edited call
  MarkValue accepted = MarkValue::Unmarked;
  std::string annotator;
  bool auto_edited = false;  // derived: the round's output differs from its input

  bool operator==(const HumanMark&) const = default;
};

/// Where humans take part. With neither flag set the session is fully machine
/// driven and every advance completes a round.
struct Interaction {
  bool human_leader = false;  // stop at awaiting_leader until a decision is submitted
  bool human_critic = false;  // stop at awaiting_critiques before each round

  bool operator==(const Interaction&) const = default;
};

struct Session {
  std::string id;
  Stage stage = Stage::Plan;
  SessionStatus status = SessionStatus::AwaitingCritiques;
  std::int64_t version = 0;
  Interaction interaction;

  CrPlanConfig plan_config;
  CrTextConfig text_config;

  // Plan stage.
  std::optional<StoryPackage> package;
  std::optional<PersonaSet> personas;
  std::vector<RoundRecord> plan_rounds;  // the last one is open while awaiting_leader / refining
  std::vector<StoryPackage> candidates;
  int selected_index = 0;
  std::string evaluator_transcript;
  std::vector<Critique> pending_critiques;  // submitted before the round's machine critiques exist

  // Text stage.
  std::optional<StoryText> story;
  std::vector<CrTextRound> text_rounds;
  std::vector<RevisionSuggestion> pending_suggestions;

  std::vector<HumanMark> human_marks;
  std::string diagnostic;  // set when status is failed

  bool operator==(const Session&) const = default;

  int total_rounds() const { return stage == Stage::Plan ? plan_config.rounds : text_config.rounds; }
  /// Rounds whose output exists.
  int completed_rounds() const;
  bool round_open() const {
    return status == SessionStatus::AwaitingLeader || status == SessionStatus::Refining;
  }
  /// The round a submission addresses: the open round, else the next one.
  int current_round() const { return completed_rounds() + 1; }
  /// Canonical text of the latest (or, once finalized, selected) plan or story.
  std::string export_text() const;
};

void to_json(nlohmann::json& j, const HumanMark& m);
void from_json(const nlohmann::json& j, HumanMark& m);
void to_json(nlohmann::json& j, const Interaction& i);
void from_json(const nlohmann::json& j, Interaction& i);
void to_json(nlohmann::json& j, const Session& s);
void from_json(const nlohmann::json& j, Session& s);

enum class EventKind {
  Created,
  Advanced,
  CritiqueSubmitted,
  CritiqueEdited,
  LeaderDecision,
  Marked,
  Failed,
};

std::string_view to_string(EventKind k);

/// One committed mutation. `patch` turns the previous snapshot into the new
/// one (JSON Patch); replaying every patch from {} rebuilds the session.
struct SessionEvent {
  std::string session_id;
  std::int64_t version = 0;
  EventKind kind = EventKind::Created;
  int round = 0;
  Author actor;
  nlohmann::json payload;
  nlohmann::json patch;
  std::int64_t at_ms = 0;  // wall clock, non-decreasing per session
};

void to_json(nlohmann::json& j, const SessionEvent& e);
void from_json(const nlohmann::json& j, SessionEvent& e);

/// One directory per data root: <id>.events.jsonl (append-only, fsync per
/// line) and <id>.json (snapshot, replaced atomically after the event lands).
class SessionStore {
 public:
  /// Throws Error{StorageError} when the directory cannot be created.
  explicit SessionStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  void append(const SessionEvent& e) const;
  void write_snapshot(const Session& s) const;
  /// Rebuilds from the event log; a torn final line (crash mid-append) is
  /// ignored. Throws Error{NotFound} / Error{StorageError}.
  Session load(const std::string& id) const;
  std::vector<SessionEvent> events(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::filesystem::path dir_;
};

struct UserMetrics {
  double edited_pass_rate = 0;    // percent of completed rounds whose output changed
  double accepted_pass_rate = 0;  // percent of Accepted marks that pass
  std::optional<double> fleiss;   // over Accepted when every round has the same >= 2 annotators
  std::size_t rounds = 0;
  std::size_t accepted_marks = 0;
};

/// Throws Error{UnmarkedRounds} when a completed round has no Accepted mark.
UserMetrics compute_user_metrics(const std::vector<Session>& sessions);
void to_json(nlohmann::json& j, const UserMetrics& m);

/// Session lifecycle on top of the engines. Safe to call from many threads;
/// each session has a single writer at a time and anything else that tries
/// to mutate it meanwhile gets Error{Conflict}.
class SessionService {
 public:
  SessionService(const llm::LlmClient& client, std::filesystem::path data_dir,
                 const llm::PromptCatalog& prompts = llm::PromptCatalog::builtin());

  /// `subject` is package text (plan) or story text (text). Throws
  /// Error{ValidationError} carrying the parse error code in its detail.
  Session create_session(Stage stage, const nlohmann::json& config, const std::string& subject,
                         Interaction interaction = {});
  Session advance(const std::string& id, std::optional<std::int64_t> expected_version = {});
  /// Plan sessions take a Critique; `edit_of` records it as an edit of that
  /// critique index (the original stays listed).
  Session submit_critique(const std::string& id, int round, Critique critique, std::optional<int> edit_of = {},
                          std::optional<std::int64_t> expected_version = {});
  /// Text sessions take a RevisionSuggestion.
  Session submit_suggestion(const std::string& id, int round, RevisionSuggestion suggestion,
                            std::optional<std::int64_t> expected_version = {});
  Session submit_leader_decision(const std::string& id, int round, LeaderDecision decision,
                                 std::optional<std::int64_t> expected_version = {});
  /// `actor` must be human to set Accepted.
  Session mark_round(const std::string& id, int round, HumanMark mark, const Author& actor,
                     std::optional<std::int64_t> expected_version = {});

  Session get_state(const std::string& id) const;
  std::vector<Session> list() const;
  /// True while an advance is running for `id`.
  bool busy(const std::string& id) const;

  const SessionStore& store() const { return store_; }

 private:
  struct Slot {
    std::mutex mu;
    Session state;
    bool busy = false;
    std::int64_t last_at = 0;
  };

  std::shared_ptr<Slot> slot(const std::string& id) const;
  /// Validates preconditions, applies `mutate` to a copy, persists, publishes.
  Session commit(Slot& slot, const Session& before, Session after, EventKind kind, int round, const Author& actor,
                 nlohmann::json payload);
  Session mutate(const std::string& id, std::optional<std::int64_t> expected_version, EventKind kind, int round,
                 const Author& actor, nlohmann::json payload, const std::function<void(Session&)>& fn);
  Session run_machine_steps(Session s) const;
  void plan_steps(Session& s) const;
  void text_steps(Session& s) const;

  const llm::LlmClient& client_;
  const llm::PromptCatalog& prompts_;
  SessionStore store_;
  mutable std::mutex map_mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

}  // namespace critics
