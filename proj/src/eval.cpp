#include "critics/eval.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "critics/rng.hpp"
#include "critics/text_util.hpp"
#include "dialogue.hpp"

namespace critics {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::A: return "A";
    case Outcome::B: return "B";
    case Outcome::Both: return "both";
    case Outcome::Neither: return "neither";
    case Outcome::Tie: return "tie";
    case Outcome::Undetermined: return "undetermined";
  }
  return "undetermined";
}

Outcome parse_outcome(std::string_view name) {
  for (auto o : {Outcome::A, Outcome::B, Outcome::Both, Outcome::Neither, Outcome::Tie, Outcome::Undetermined})
    if (to_string(o) == name) return o;
  throw Error(ErrorCode::InvalidConfig, "unknown outcome '" + std::string(name) + "'", std::string(name));
}

MetricSet MetricSet::plan() {
  return {Stage::Plan,
          {{"interesting", MetricKind::Standard},
           {"coherent", MetricKind::Standard},
           {"creative", MetricKind::Standard},
           {"relevant", MetricKind::Relevance}}};
}

MetricSet MetricSet::text() {
  return {Stage::Text,
          {{"interesting", MetricKind::Standard},
           {"coherence", MetricKind::Standard},
           {"consistency", MetricKind::Standard},
           {"creative", MetricKind::Standard}}};
}

MetricSet MetricSet::plan_evaluator() {
  auto m = plan();
  m.metrics.back().kind = MetricKind::Standard;
  return m;
}

std::vector<std::string> MetricSet::ids() const {
  std::vector<std::string> out;
  for (const auto& m : metrics) out.push_back(m.id);
  return out;
}

std::string_view verdict_token(Outcome o, MetricKind kind) {
  switch (o) {
    case Outcome::A: return kind == MetricKind::Relevance ? "OA" : "A";
    case Outcome::B: return kind == MetricKind::Relevance ? "OB" : "B";
    case Outcome::Both: return "BY";
    case Outcome::Neither: return "BN";
    case Outcome::Tie: return "C";
    case Outcome::Undetermined: return "UN";
  }
  return "UN";
}

Outcome outcome_from_token(std::string_view token) {
  auto t = text::to_lower(text::trim(token));
  if (t == "a" || t == "oa") return Outcome::A;
  if (t == "b" || t == "ob") return Outcome::B;
  if (t == "c" || t == "ti") return Outcome::Tie;
  if (t == "by") return Outcome::Both;
  if (t == "bn") return Outcome::Neither;
  if (t == "un") return Outcome::Undetermined;
  throw Error(ErrorCode::VerdictParseFailure, "unknown verdict token '" + std::string(token) + "'",
              std::string(token));
}

std::vector<Verdict> parse_verdicts(std::string_view raw, const MetricSet& metrics) {
  // Scan for "<digits> <sep> [[TOKEN]]"; later occurrences win so that a
  // restated final list overrides anything quoted earlier.
  const std::size_t m = metrics.metrics.size();
  std::vector<std::optional<std::string>> tokens(m);
  std::vector<std::size_t> offsets(m, 0);
  std::size_t pos = 0;
  while ((pos = raw.find("[[", pos)) != std::string_view::npos) {
    auto close = raw.find("]]", pos + 2);
    if (close == std::string_view::npos) break;
    auto token = raw.substr(pos + 2, close - pos - 2);
    std::size_t i = pos;
    while (i > 0 && (raw[i - 1] == ' ' || raw[i - 1] == '\t')) --i;
    if (i > 0 && (raw[i - 1] == ':' || raw[i - 1] == ')' || raw[i - 1] == '.')) --i;
    while (i > 0 && (raw[i - 1] == ' ' || raw[i - 1] == '\t')) --i;
    std::size_t digits_end = i;
    while (i > 0 && std::isdigit(static_cast<unsigned char>(raw[i - 1]))) --i;
    if (i < digits_end && digits_end - i < 4) {
      auto n = std::stoul(std::string(raw.substr(i, digits_end - i)));
      if (n >= 1 && n <= m) {
        tokens[n - 1] = std::string(token);
        offsets[n - 1] = pos;
      }
    }
    pos = close + 2;
  }
  std::vector<Verdict> out;
  for (std::size_t k = 0; k < m; ++k) {
    auto where = "position " + std::to_string(k + 1) + ": ";
    if (!tokens[k]) throw Error(ErrorCode::VerdictParseFailure, "no verdict for question " + std::to_string(k + 1), where);
    try {
      out.push_back({metrics.metrics[k].id, outcome_from_token(*tokens[k])});
    } catch (const Error&) {
      throw Error(ErrorCode::VerdictParseFailure, "unknown verdict token '" + *tokens[k] + "'", where + *tokens[k]);
    }
  }
  return out;
}

std::string render_verdicts(const std::vector<Verdict>& verdicts, const MetricSet& metrics) {
  std::string out;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    auto kind = i < metrics.metrics.size() ? metrics.metrics[i].kind : MetricKind::Standard;
    if (i) out += ", ";
    out += std::to_string(i + 1) + ":[[" + std::string(verdict_token(verdicts[i].outcome, kind)) + "]]";
  }
  return out;
}

Outcome flip(Outcome o) {
  if (o == Outcome::A) return Outcome::B;
  if (o == Outcome::B) return Outcome::A;
  return o;
}

std::vector<Verdict> derandomize(std::vector<Verdict> v, Order order) {
  if (order == Order::BA)
    for (auto& x : v) x.outcome = flip(x.outcome);
  return v;
}

Order presentation_order(std::uint64_t seed) {
  return (rng::keyed(seed, rng::kJudgeStream) & 1) ? Order::BA : Order::AB;
}

VerdictSet judge_pair(const llm::LlmClient& client, const llm::PromptCatalog& prompts, std::string_view item_a,
                      std::string_view item_b, const MetricSet& metrics, std::uint64_t seed, std::string pair_id,
                      const JudgeSettings& settings) {
  if (text::trim(item_a).empty() || text::trim(item_b).empty())
    throw Error(ErrorCode::EmptyInput, "judge_pair needs two non-empty items", pair_id);
  VerdictSet out;
  out.pair_id = std::move(pair_id);
  out.presentation_order = presentation_order(seed);
  bool swapped = out.presentation_order == Order::BA;
  auto first = swapped ? item_b : item_a;
  auto second = swapped ? item_a : item_b;
  auto id = metrics.stage == Stage::Plan ? "pairwise_judge_plan" : "pairwise_judge_text";
  auto prompt = prompts.render(id, {{"storyline_a", std::string(first)}, {"storyline_b", std::string(second)}});

  std::vector<Verdict> example;
  for (const auto& m : metrics.metrics)
    example.push_back({m.id, m.kind == MetricKind::Relevance ? Outcome::Both : Outcome::A});
  auto example_line = render_verdicts(example, metrics);
  auto reminder = [&](const std::string&) { return prompts.render("verdict_reminder", {{"example", example_line}}); };

  detail::Speaker judge{client, settings.model, settings.temperature, std::nullopt};
  auto presented = detail::converse(judge, prompt, reminder, settings.attempts, ErrorCode::VerdictParseFailure,
                                    "judge verdict", [&](const std::string& reply, bool) {
                                      try {
                                        auto v = parse_verdicts(reply, metrics);
                                        out.raw_response = reply;
                                        return v;
                                      } catch (const Error& e) {
                                        throw detail::Unparsed{e.detail()};
                                      }
                                    });
  out.verdicts = derandomize(std::move(presented), out.presentation_order);
  return out;
}

const MetricRate& WinRateTable::at(std::string_view metric_id) const {
  for (const auto& r : rows)
    if (r.metric_id == metric_id) return r;
  throw Error(ErrorCode::InvalidConfig, "no metric '" + std::string(metric_id) + "' in win-rate table");
}

WinRateTable aggregate_win_rates(const std::vector<VerdictSet>& sets, const MetricSet& metrics) {
  if (sets.empty()) throw Error(ErrorCode::EmptyInput, "no verdict sets to aggregate");
  auto ids = metrics.ids();
  std::vector<std::size_t> a(ids.size(), 0), b(ids.size(), 0);
  for (const auto& s : sets) {
    if (s.verdicts.size() != ids.size())
      throw Error(ErrorCode::MixedMetricSets, "verdict set has " + std::to_string(s.verdicts.size()) + " verdicts",
                  s.pair_id);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto& v = s.verdicts[i];
      if (v.metric_id != ids[i])
        throw Error(ErrorCode::MixedMetricSets, "metric '" + v.metric_id + "' where '" + ids[i] + "' was expected",
                    s.pair_id);
      if (v.outcome == Outcome::A || v.outcome == Outcome::Both) ++a[i];
      if (v.outcome == Outcome::B || v.outcome == Outcome::Both) ++b[i];
    }
  }
  WinRateTable t;
  const double n = static_cast<double>(sets.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    t.rows.push_back({ids[i], 100.0 * static_cast<double>(a[i]) / n, 100.0 * static_cast<double>(b[i]) / n, sets.size()});
  return t;
}

Outcome kappa_label(Outcome o) {
  if (o == Outcome::Tie || o == Outcome::Undetermined) return Outcome::Neither;
  return o;
}

void to_json(nlohmann::json& j, const VerdictSet& v) {
  nlohmann::json verdicts = nlohmann::json::object();
  for (const auto& x : v.verdicts) verdicts[x.metric_id] = std::string(to_string(x.outcome));
  j = {{"pair_id", v.pair_id},
       {"presentation_order", v.presentation_order == Order::AB ? "AB" : "BA"},
       {"verdicts", verdicts},
       {"raw_response", v.raw_response}};
}

void to_json(nlohmann::json& j, const WinRateTable& t) {
  j = nlohmann::json::object();
  auto round2 = [](double x) { return std::round(x * 100.0) / 100.0; };
  for (const auto& r : t.rows) j[r.metric_id] = {{"rate_a", round2(r.rate_a)}, {"rate_b", round2(r.rate_b)}, {"n", r.n}};
}

AgreementReport agreement_report(const std::map<std::string, std::vector<Outcome>>& raters) {
  if (raters.empty() || raters.begin()->second.empty()) throw Error(ErrorCode::EmptyInput, "no ratings");
  std::map<std::string, std::vector<Outcome>> labels;
  for (const auto& [name, outcomes] : raters) {
    auto& out = labels[name];
    for (auto o : outcomes) out.push_back(kappa_label(o));
  }
  AgreementReport r;
  r.n_items = labels.begin()->second.size();
  std::set<Outcome> seen;
  for (auto a = labels.begin(); a != labels.end(); ++a) {
    if (a->second.size() != r.n_items)
      throw Error(ErrorCode::LengthMismatch, "raters labelled different item counts", a->first);
    seen.insert(a->second.begin(), a->second.end());
    for (auto b = std::next(a); b != labels.end(); ++b)
      r.cohen[a->first + "~" + b->first] = cohen_kappa(a->second, b->second);
  }
  r.n_categories = seen.size();
  if (labels.size() >= 2) {
    std::vector<std::vector<Outcome>> items(r.n_items);
    for (const auto& [_, ls] : labels)
      for (std::size_t i = 0; i < r.n_items; ++i) items[i].push_back(ls[i]);
    r.fleiss = fleiss_kappa(category_counts(items));
  }
  return r;
}

void to_json(nlohmann::json& j, const AgreementReport& r) {
  j = {{"cohen", r.cohen}, {"n_items", r.n_items}, {"n_categories", r.n_categories}};
  j["fleiss"] = r.fleiss ? nlohmann::json(*r.fleiss) : nlohmann::json(nullptr);
}

}  // namespace critics
