#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "critics/agreement.hpp"
#include "critics/llm/chat.hpp"
#include "critics/llm/prompt.hpp"
#include "critics/stage.hpp"

namespace critics {

enum class Outcome { A, B, Both, Neither, Tie, Undetermined };

std::string_view to_string(Outcome o);
/// Inverse of to_string; throws Error{InvalidConfig}.
Outcome parse_outcome(std::string_view name);

enum class MetricKind {
  Standard,   // A / B / C (tie), plus BY / BN / UN
  Relevance,  // BY / OA / OB / BN / UN
};

struct Metric {
  std::string id;
  MetricKind kind = MetricKind::Standard;

  bool operator==(const Metric&) const = default;
};

struct MetricSet {
  Stage stage = Stage::Plan;
  std::vector<Metric> metrics;

  static MetricSet plan();   // interesting, coherent, creative, relevant
  static MetricSet text();   // interesting, coherence, consistency, creative
  /// The candidate evaluator asks about the same four plan axes but takes
  /// A/B answers for relevance too.
  static MetricSet plan_evaluator();

  std::vector<std::string> ids() const;
  bool operator==(const MetricSet&) const = default;
};

struct Verdict {
  std::string metric_id;
  Outcome outcome = Outcome::Undetermined;

  bool operator==(const Verdict&) const = default;
};

enum class Order { AB, BA };

struct VerdictSet {
  std::string pair_id;
  Order presentation_order = Order::AB;
  std::vector<Verdict> verdicts;  // canonical: A/B refer to the caller's arguments
  std::string raw_response;
};

/// Token spelling used by render_verdicts for `o` under `kind`.
std::string_view verdict_token(Outcome o, MetricKind kind);
/// Accepts every token of either kind plus the evaluator's TI; throws on
/// anything else.
Outcome outcome_from_token(std::string_view token);

/// Reads the last "n:[[TOKEN]]" for each metric position 1..m. Surrounding
/// prose is ignored. Throws Error{VerdictParseFailure} with detail
/// "position N: TOKEN" (TOKEN empty when the position is missing).
std::vector<Verdict> parse_verdicts(std::string_view raw, const MetricSet& metrics);

/// "1:[[A]], 2:[[B]], 3:[[B]], 4:[[BY]]"
std::string render_verdicts(const std::vector<Verdict>& verdicts, const MetricSet& metrics);

/// Swaps A and B; an involution.
Outcome flip(Outcome o);
std::vector<Verdict> derandomize(std::vector<Verdict> v, Order order);

struct JudgeSettings {
  std::string model = "gpt-4";
  double temperature = 0.0;
  int attempts = 3;
};

/// Presentation order is a coin drawn from (seed, judge stream). The judge
/// prompt is chosen by metrics.stage; the reply is re-requested with a format
/// reminder up to settings.attempts times.
VerdictSet judge_pair(const llm::LlmClient& client, const llm::PromptCatalog& prompts,
                      std::string_view item_a, std::string_view item_b, const MetricSet& metrics,
                      std::uint64_t seed, std::string pair_id = {}, const JudgeSettings& settings = {});

Order presentation_order(std::uint64_t seed);

struct MetricRate {
  std::string metric_id;
  double rate_a = 0;
  double rate_b = 0;
  std::size_t n = 0;
};

struct WinRateTable {
  std::vector<MetricRate> rows;

  const MetricRate& at(std::string_view metric_id) const;
};

/// rate_A = 100 (#A + #Both) / n and symmetrically for B.
/// Throws Error{EmptyInput} / Error{MixedMetricSets}.
WinRateTable aggregate_win_rates(const std::vector<VerdictSet>& sets, const MetricSet& metrics);

/// Label used for agreement statistics: ties and undetermined answers count
/// as "neither" so that judge and annotator labels share one category set.
Outcome kappa_label(Outcome o);

/// Cohen's kappa for every rater pair ("x~y", names in map order) and Fleiss'
/// kappa across all raters, on kappa_label'd outcomes. Fleiss is left unset
/// with fewer than two raters. Throws Error{LengthMismatch} / Error{EmptyInput}.
AgreementReport agreement_report(const std::map<std::string, std::vector<Outcome>>& raters);

void to_json(nlohmann::json& j, const VerdictSet& v);
void to_json(nlohmann::json& j, const WinRateTable& t);
void to_json(nlohmann::json& j, const AgreementReport& r);

}  // namespace critics
