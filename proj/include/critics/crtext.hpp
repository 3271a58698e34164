#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "critics/crplan.hpp"
#include "critics/sentences.hpp"

namespace critics {

inline constexpr std::string_view kImageCriterion = "image";
inline constexpr std::string_view kVoiceCriterion = "voice";

struct RevisionSuggestion {
  std::string criterion_id;  // "image", "voice", or an extra text-stage criterion
  std::string original;
  std::string replacement;
  std::string reason;
  Author author = Author::machine("critic");

  bool operator==(const RevisionSuggestion&) const = default;
};

struct CrTextConfig {
  int rounds = 3;
  int context_window = 5;  // sentences on each side of the target
  bool use_leader = true;
  std::uint64_t rng_seed = 0;
  int reprompt_limit = 3;
  ModelSettings models;
  /// Text-stage criteria critiqued alongside Image and Voice.
  std::vector<Criterion> extra_criteria;

  void validate() const;
  bool operator==(const CrTextConfig&) const = default;
};

struct CrTextRound {
  int round = 1;
  SentenceSpan target;
  RevisionSuggestion image;
  RevisionSuggestion voice;
  std::vector<RevisionSuggestion> extra;  // extra criteria, then human suggestions
  LeaderDecision decision;                // index: 0 image, 1 voice, 2+ extra
  std::vector<int> applied;
  StoryText output;

  /// image, voice, extra... in decision-index order.
  std::vector<RevisionSuggestion> suggestions() const;
  bool operator==(const CrTextRound&) const = default;
};

struct CrTextResult {
  StoryText output;
  std::vector<CrTextRound> rounds;

  bool operator==(const CrTextResult&) const = default;
};

struct CrTextHooks {
  std::function<std::vector<RevisionSuggestion>(int round, const SentenceSpan& target, const std::string& context)>
      extra_suggestions;
  std::function<std::optional<LeaderDecision>(int round, const std::vector<RevisionSuggestion>& suggestions)>
      leader_override;
  std::function<void(const CrTextRound& record)> round_completed;
};

class CrTextAborted : public Error {
 public:
  CrTextAborted(const Error& cause, CrTextResult partial)
      : Error(ErrorCode::RunAborted, std::string("text run aborted: ") + cause.what(),
              std::string(to_string(cause.code()))),
        cause_(cause.code()),
        partial_(std::move(partial)) {}
  ErrorCode cause() const { return cause_; }
  const CrTextResult& partial() const { return partial_; }

 private:
  ErrorCode cause_;
  CrTextResult partial_;
};

/// Uniform draw over ordinals not in `revised` (all ordinals once every one has
/// been revised) from the stream keyed by (seed, sentence stream + round).
/// Throws Error{NoSentences}.
SentenceSpan sample_sentence(const StoryText& story, std::uint64_t rng_seed, int round,
                             const std::set<int>& revised = {});

/// The target sentence plus up to `window` sentences on each side, verbatim.
std::string context_window(const StoryText& story, const SentenceSpan& target, int window);

/// Words that count as naming a creativity feature of `criterion_id`.
const std::vector<std::string>& feature_words(std::string_view criterion_id);

/// `require_feature`: the reason must name one of the criterion's features.
RevisionSuggestion parse_suggestion(std::string_view reply, std::string_view target, std::string_view criterion_id,
                                    bool require_feature);
int parse_revision_choice(std::string_view reply, const std::vector<RevisionSuggestion>& suggestions);

class TextEngine {
 public:
  TextEngine(const llm::LlmClient& client, CrTextConfig cfg,
             const llm::PromptCatalog& prompts = llm::PromptCatalog::builtin());

  const CrTextConfig& config() const { return cfg_; }

  RevisionSuggestion image_critique(const std::string& target, const std::string& context) const;
  RevisionSuggestion voice_critique(const std::string& target, const std::string& context) const;
  RevisionSuggestion criterion_critique(const Criterion& criterion, const std::string& target,
                                        const std::string& context) const;
  /// Image and voice (and extra criteria) for one target, concurrently when allowed.
  std::vector<RevisionSuggestion> critique_all(const std::string& target, const std::string& context) const;
  /// Identical replacements are resolved to 0 without a call.
  LeaderDecision leader_select_revision(const std::vector<RevisionSuggestion>& suggestions,
                                        const std::string& context) const;
  /// First half of a round: samples the target and collects suggestions. In
  /// the leaderless configuration the whole chain (image, then voice on the
  /// image output, then extras) runs here and the record comes back complete.
  CrTextRound propose(const StoryText& story, int round, const std::set<int>& revised) const;
  /// Second half: applies record.decision to the target span.
  void finish(const StoryText& story, CrTextRound& record) const;
  /// propose, hooks, leader, finish.
  CrTextRound run_round(const StoryText& story, int round, const std::set<int>& revised,
                        const CrTextHooks* hooks = nullptr) const;

  /// Throws CrTextAborted when a stage fails.
  CrTextResult run(const StoryText& story, const CrTextHooks* hooks = nullptr) const;

 private:
  RevisionSuggestion critique(const std::string& prompt_id, const Criterion* criterion, std::string_view criterion_id,
                              const std::string& target, const std::string& context) const;

  const llm::LlmClient& client_;
  CrTextConfig cfg_;
  const llm::PromptCatalog& prompts_;
};

void to_json(nlohmann::json& j, const RevisionSuggestion& s);
void from_json(const nlohmann::json& j, RevisionSuggestion& s);
void to_json(nlohmann::json& j, const CrTextRound& r);
void from_json(const nlohmann::json& j, CrTextRound& r);
void to_json(nlohmann::json& j, const CrTextResult& r);
void from_json(const nlohmann::json& j, CrTextResult& r);
void to_json(nlohmann::json& j, const CrTextConfig& c);
void from_json(const nlohmann::json& j, CrTextConfig& c);

}  // namespace critics
