#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "critics/criteria.hpp"
#include "critics/error.hpp"
#include "critics/llm/chat.hpp"
#include "critics/llm/prompt.hpp"
#include "critics/story_model.hpp"

namespace critics {

enum class PersonaRole { Expert, Leader };

struct Persona {
  std::string profession;
  std::string feedback_focus;
  std::string feedback_focus_details;
  PersonaRole role = PersonaRole::Expert;

  bool operator==(const Persona&) const = default;
};

struct PersonaSet {
  std::vector<Persona> experts;  // exactly three
  Persona leader;

  bool operator==(const PersonaSet&) const = default;
};

struct Author {
  enum class Kind { Machine, Human };
  Kind kind = Kind::Machine;
  std::string name;  // persona profession, "critic", "leader" or the human's name

  static Author machine(std::string name) { return {Kind::Machine, std::move(name)}; }
  static Author human(std::string name) { return {Kind::Human, std::move(name)}; }
  bool is_human() const { return kind == Kind::Human; }
  bool operator==(const Author&) const = default;
};

struct Critique {
  std::string criterion_id;
  std::string question;
  std::string rationale;
  Author author;
  std::vector<std::string> candidates_considered;  // the critic's three drafts
  std::optional<int> edited_from;                   // index of the critique a human edit replaces

  bool operator==(const Critique&) const = default;
};

struct LeaderDecision {
  int chosen_index = 0;
  std::string justification;
  Author author = Author::machine("leader");
  bool synthetic = false;  // recorded by the leaderless configuration, not chosen by anyone

  bool operator==(const LeaderDecision&) const = default;
};

struct RoundRecord {
  int round = 1;
  StoryPackage input_plan;
  std::vector<Critique> critiques;
  LeaderDecision decision;
  std::vector<int> applied;  // critique indices applied, in order
  StoryPackage refined_plan;

  bool operator==(const RoundRecord&) const = default;
};

struct CrPlanResult {
  std::vector<RoundRecord> rounds;
  std::vector<StoryPackage> candidates;  // initial plan, then one per round
  int selected_index = 0;
  std::string evaluator_transcript;

  bool operator==(const CrPlanResult&) const = default;
};

/// Which model and temperature each role uses.
struct ModelSettings {
  std::string critic_model = "gpt-3.5-turbo";
  double critic_temperature = 1.0;  // critics, leader, refiner, persona creator
  std::string judge_model = "gpt-4";
  double judge_temperature = 0.0;  // evaluator and pairwise judge

  bool operator==(const ModelSettings&) const = default;
};

struct CrPlanConfig {
  int rounds = 3;
  std::vector<Criterion> criteria = default_plan_criteria();
  bool use_personas = true;
  bool use_leader = true;
  int reprompt_limit = 3;  // total attempts per call, first one included
  std::uint64_t rng_seed = 0;
  ModelSettings models;

  /// Throws Error{InvalidConfig}.
  void validate() const;
  bool operator==(const CrPlanConfig&) const = default;
};

/// Intervention points for run_crplan. Unset callbacks are skipped.
struct CrPlanHooks {
  /// Called after machine critiques are generated; returned critiques are
  /// appended before the leader sees the list.
  std::function<std::vector<Critique>(int round, const StoryPackage& plan, const std::vector<Critique>& critiques)>
      extra_critiques;
  /// Called before machine arbitration; a returned decision replaces it.
  std::function<std::optional<LeaderDecision>(int round, const std::vector<Critique>& critiques)> leader_override;
  /// Called when a round is complete, before the next one starts.
  std::function<void(const RoundRecord& record)> round_completed;
};

/// A stage failure inside run_crplan, carrying every round that completed.
class CrPlanAborted : public Error {
 public:
  CrPlanAborted(const Error& cause, CrPlanResult partial)
      : Error(ErrorCode::RunAborted, std::string("plan run aborted: ") + cause.what(),
              std::string(to_string(cause.code()))),
        cause_(cause.code()),
        partial_(std::move(partial)) {}
  ErrorCode cause() const { return cause_; }
  const CrPlanResult& partial() const { return partial_; }

 private:
  ErrorCode cause_;
  CrPlanResult partial_;
};

/// Number of critics per round: three, or one per criterion when more are
/// configured. Critic i uses criterion i mod |criteria| and expert i mod 3.
std::size_t critic_count(const CrPlanConfig& cfg);

// Reply parsers, exposed for tests. They throw Error with the matching
// *ParseFailure code when the reply cannot be used.
PersonaSet parse_personas(std::string_view reply);
/// `lenient` accepts the whole reply as the question when markers are missing.
Critique parse_critique(std::string_view reply, bool lenient);
/// Index into a list of `n` critiques.
int parse_leader_choice(std::string_view reply, const std::vector<Critique>& critiques);

/// The plan-stage protocol bound to one client and configuration.
class PlanEngine {
 public:
  PlanEngine(const llm::LlmClient& client, CrPlanConfig cfg,
             const llm::PromptCatalog& prompts = llm::PromptCatalog::builtin());

  const CrPlanConfig& config() const { return cfg_; }

  PersonaSet create_personas(const StoryPackage& pkg) const;
  /// `persona` is ignored when personas are disabled.
  Critique generate_critique(const Persona* persona, const Criterion& criterion, const StoryPackage& pkg) const;
  /// One critique per critic, in critic order. Runs concurrently when the
  /// backend allows it.
  std::vector<Critique> generate_critiques(const PersonaSet* personas, const StoryPackage& pkg) const;
  /// Throws Error{EmptyCritiqueList}; a single critique is chosen without a call.
  LeaderDecision leader_select(const std::vector<Critique>& critiques, const StoryPackage& pkg,
                               const Persona* leader) const;
  StoryPackage refine_plan(const StoryPackage& pkg, const Critique& critique) const;
  /// Applies the decision (or, leaderless, every critique in order).
  /// Returns (refined plan, applied indices).
  std::pair<StoryPackage, std::vector<int>> apply(const StoryPackage& pkg, const std::vector<Critique>& critiques,
                                                  const LeaderDecision& decision) const;
  /// Synthetic decision recorded by the leaderless configuration.
  static LeaderDecision leaderless_decision();
  /// Sequential knockout; returns (selected index, transcript).
  std::pair<int, std::string> evaluate_candidates(const std::vector<StoryPackage>& candidates,
                                                  const std::string& premise) const;

  /// Throws CrPlanAborted when a stage fails.
  CrPlanResult run(const StoryPackage& pkg, const CrPlanHooks* hooks = nullptr) const;

 private:
  std::optional<std::string> persona_system(const Persona* p) const;

  const llm::LlmClient& client_;
  CrPlanConfig cfg_;
  const llm::PromptCatalog& prompts_;
};

void to_json(nlohmann::json& j, const Persona& p);
void from_json(const nlohmann::json& j, Persona& p);
void to_json(nlohmann::json& j, const PersonaSet& p);
void from_json(const nlohmann::json& j, PersonaSet& p);
void to_json(nlohmann::json& j, const Author& a);
void from_json(const nlohmann::json& j, Author& a);
void to_json(nlohmann::json& j, const Critique& c);
void from_json(const nlohmann::json& j, Critique& c);
void to_json(nlohmann::json& j, const LeaderDecision& d);
void from_json(const nlohmann::json& j, LeaderDecision& d);
void to_json(nlohmann::json& j, const RoundRecord& r);
void from_json(const nlohmann::json& j, RoundRecord& r);
void to_json(nlohmann::json& j, const CrPlanResult& r);
void from_json(const nlohmann::json& j, CrPlanResult& r);
void to_json(nlohmann::json& j, const ModelSettings& m);
void from_json(const nlohmann::json& j, ModelSettings& m);
void to_json(nlohmann::json& j, const CrPlanConfig& c);
void from_json(const nlohmann::json& j, CrPlanConfig& c);

}  // namespace critics
