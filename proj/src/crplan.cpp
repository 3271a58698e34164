#include "critics/crplan.hpp"

#include <algorithm>
#include <cctype>
#include <future>
#include <regex>
#include <set>

#include "critics/eval.hpp"
#include "critics/rng.hpp"
#include "critics/text_util.hpp"
#include "dialogue.hpp"

namespace critics {

namespace {

// Drops list bullets, heading marks and emphasis around a reply line.
std::string clean_line(std::string_view line) {
  auto t = text::trim(line);
  while (!t.empty() && (t.front() == '#' || t.front() == '-' || t.front() == '>' ||
                        (t.front() == '*' && !(t.size() > 1 && t[1] == '*'))))
    t = text::trim(t.substr(1));
  return text::strip_decoration(t);
}

std::string unquote(std::string s) {
  auto t = std::string(text::trim(s));
  auto strip = [&](std::string_view open, std::string_view close) {
    if (t.size() >= open.size() + close.size() && t.compare(0, open.size(), open) == 0 &&
        t.compare(t.size() - close.size(), close.size(), close) == 0) {
      t = std::string(text::trim(std::string_view(t).substr(open.size(), t.size() - open.size() - close.size())));
      return true;
    }
    return false;
  };
  strip("\"", "\"") || strip("\xE2\x80\x9C", "\xE2\x80\x9D") || strip("'", "'");
  return t;
}

// If `line` starts with one of `keys` (case-insensitive, followed by ':'),
// returns the index of the key and sets `rest`.
int match_key(const std::string& line, std::initializer_list<std::string_view> keys, std::string& rest) {
  int i = 0;
  for (auto key : keys) {
    if (text::istarts_with(line, key)) {
      auto after = text::trim(std::string_view(line).substr(key.size()));
      if (!after.empty() && after.front() == ':') {
        rest = text::strip_decoration(text::trim(after.substr(1)));
        return i;
      }
    }
    ++i;
  }
  return -1;
}

std::string plan_text(const StoryPackage& pkg) {
  auto s = render_story_package(pkg);
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

void append_field(std::string& field, const std::string& more) {
  if (more.empty()) return;
  if (!field.empty()) field += ' ';
  field += more;
}

}  // namespace

// ---------------------------------------------------------------- personas

PersonaSet parse_personas(std::string_view reply) {
  static const std::regex header(R"(^(expert\s*(\d+)|leader)\s*(?:[.:)]\s*(.*)|$))", std::regex::icase);
  struct Block {
    bool leader = false;
    Persona p;
  };
  std::vector<Block> blocks;
  std::string* field = nullptr;
  for (const auto& raw : text::split_lines(reply)) {
    auto line = clean_line(raw);
    if (line.empty()) continue;
    std::smatch m;
    std::string rest;
    if (std::regex_match(line, m, header)) {
      blocks.push_back({!m[2].matched, {}});
      blocks.back().p.role = blocks.back().leader ? PersonaRole::Leader : PersonaRole::Expert;
      field = nullptr;
      rest = clean_line(m[3].str());
      if (rest.empty()) continue;
      line = rest;
    }
    if (blocks.empty()) continue;
    auto& p = blocks.back().p;
    int k = match_key(line, {"profession", "feedback focus details", "feedback focus"}, rest);
    if (k == 0) field = &p.profession;
    if (k == 1) field = &p.feedback_focus_details;
    if (k == 2) field = &p.feedback_focus;
    if (k >= 0) {
      *field = rest;
    } else if (field) {
      append_field(*field, line);
    }
  }
  PersonaSet out;
  bool have_leader = false;
  for (auto& b : blocks) {
    if (b.leader && !have_leader) {
      out.leader = b.p;
      have_leader = true;
    } else if (!b.leader && out.experts.size() < 3) {
      out.experts.push_back(b.p);
    }
  }
  if (out.experts.size() < 3)
    throw Error(ErrorCode::PersonaParseFailure, "expected three expert personas",
                "found " + std::to_string(out.experts.size()));
  if (!have_leader) throw Error(ErrorCode::PersonaParseFailure, "no Leader persona block", "Leader");
  auto check = [](const Persona& p, const std::string& who) {
    for (const auto* f : {&p.profession, &p.feedback_focus, &p.feedback_focus_details}) {
      auto t = text::trim(*f);
      // An echoed "// ... Profession ... //" placeholder counts as empty.
      if (t.empty() || t.substr(0, 3) == "...")
        throw Error(ErrorCode::PersonaParseFailure, who + " persona has an empty field", who);
    }
  };
  for (std::size_t i = 0; i < 3; ++i) check(out.experts[i], "Expert " + std::to_string(i + 1));
  check(out.leader, "Leader");
  return out;
}

// --------------------------------------------------------------- critiques

Critique parse_critique(std::string_view reply, bool lenient) {
  static const std::regex numbered(R"(^(?:question\s*)?([1-9])\s*[:.)]\s*(.*)$)", std::regex::icase);
  static const std::regex reference(R"(^(?:question\s*)?#?([1-9])\s*(?:[:.)\-]\s*(.*))?$)", std::regex::icase);
  std::vector<std::string> candidates(3);
  std::vector<bool> seen(3, false);
  std::string best, why;
  bool have_best = false;
  std::string* field = nullptr;
  for (const auto& raw : text::split_lines(reply)) {
    auto line = clean_line(raw);
    if (line.empty()) continue;
    std::string rest;
    int k = match_key(line, {"best question", "selected question", "chosen question", "best", "critique", "question"},
                      rest);
    if (k >= 0) {
      best = unquote(rest);
      have_best = true;
      field = &best;
      continue;
    }
    k = match_key(line, {"why", "reason", "rationale"}, rest);
    if (k >= 0) {
      why = rest;
      field = &why;
      continue;
    }
    std::smatch m;
    if (!have_best && std::regex_match(line, m, numbered)) {
      auto n = std::stoi(m[1].str());
      if (n >= 1 && n <= 3) {
        candidates[n - 1] = unquote(text::strip_decoration(m[2].str()));
        seen[n - 1] = true;
        field = &candidates[n - 1];
        continue;
      }
    }
    if (field) append_field(*field, line);
  }
  // "Best Question: Question 2" refers back to a candidate.
  std::smatch m;
  if (have_best && std::regex_match(best, m, reference)) {
    auto n = std::stoi(m[1].str());
    auto rest = m[2].matched ? unquote(m[2].str()) : std::string();
    if (!rest.empty()) {
      best = rest;
    } else if (n >= 1 && n <= 3 && seen[n - 1]) {
      best = candidates[n - 1];
    }
  }
  int found = static_cast<int>(std::count(seen.begin(), seen.end(), true));
  bool complete = found == 3 && !text::trim(best).empty() && !text::trim(why).empty();
  if (!complete && !lenient) {
    std::string missing;
    if (found < 3) missing += "three candidate questions; ";
    if (text::trim(best).empty()) missing += "Best Question; ";
    if (text::trim(why).empty()) missing += "Why; ";
    throw Error(ErrorCode::CritiqueParseFailure, "critique reply is missing: " + missing, missing);
  }
  Critique c;
  c.question = text::trim(best).empty() ? text::squash(reply) : std::string(text::trim(best));
  if (c.question.empty()) throw Error(ErrorCode::CritiqueParseFailure, "critique reply is empty");
  c.rationale = std::string(text::trim(why));
  for (std::size_t i = 0; i < 3; ++i) c.candidates_considered.push_back(seen[i] ? candidates[i] : c.question);
  return c;
}

// ----------------------------------------------------------------- leader

int parse_leader_choice(std::string_view reply, const std::vector<Critique>& critiques) {
  const int n = static_cast<int>(critiques.size());
  auto lower = text::to_lower(reply);
  auto in_range = [&](int k) { return k >= 1 && k <= n; };

  // 1. An explicit choice phrase followed by a number or an ordinal word.
  static const std::regex choice(
      R"((?:i\s+(?:would\s+)?(?:choose|chose|select|pick|prefer)|the\s+best\s+(?:question|critique|one)\s+is|best\s+(?:question|critique)\s*:|(?:selected|chosen)\s*(?:question|critique)?\s*:|my\s+choice\s+is)\s*(?:is\s+)?(?:the\s+)?(?:question|critique)?\s*(?:number\s*|no\.?\s*)?[#("']?\s*(\d+|first|second|third|fourth|fifth|sixth))");
  static const std::vector<std::string> words = {"first", "second", "third", "fourth", "fifth", "sixth"};
  std::smatch m;
  std::string lower_s(lower);
  if (std::regex_search(lower_s, m, choice)) {
    auto tok = m[1].str();
    int k = 0;
    if (std::isdigit(static_cast<unsigned char>(tok[0]))) {
      k = std::stoi(tok);
    } else {
      k = static_cast<int>(std::find(words.begin(), words.end(), tok) - words.begin()) + 1;
    }
    if (in_range(k)) return k - 1;
  }

  // 2. Exactly one question quoted verbatim.
  auto flat = text::squash(lower);
  int hit = -1, hits = 0;
  for (int i = 0; i < n; ++i) {
    auto q = text::squash(text::to_lower(critiques[i].question));
    if (q.size() >= 8 && flat.find(q) != std::string::npos) {
      hit = i;
      ++hits;
    }
  }
  if (hits == 1) return hit;

  // 3. A single distinct "question N" / "critique N" mention.
  static const std::regex mention(R"((?:question|critique)\s*(?:number\s*)?#?\s*(\d+))");
  std::set<int> mentioned;
  for (auto it = std::sregex_iterator(lower_s.begin(), lower_s.end(), mention); it != std::sregex_iterator(); ++it) {
    int k = std::stoi((*it)[1].str());
    if (in_range(k)) mentioned.insert(k);
  }
  if (mentioned.size() == 1) return *mentioned.begin() - 1;
  throw Error(ErrorCode::DecisionParseFailure, "could not tell which critique the leader chose",
              mentioned.size() > 1 ? "several questions mentioned" : "no question referenced");
}

// ----------------------------------------------------------------- config

void CrPlanConfig::validate() const {
  if (rounds < 0) throw Error(ErrorCode::InvalidConfig, "rounds must be >= 0");
  if (criteria.empty()) throw Error(ErrorCode::InvalidConfig, "at least one criterion is required");
  if (reprompt_limit < 1) throw Error(ErrorCode::InvalidConfig, "reprompt_limit must be >= 1");
  std::set<std::string> ids;
  for (const auto& c : criteria) {
    if (c.stage != Stage::Plan)
      throw Error(ErrorCode::InvalidConfig, "criterion '" + c.id + "' is not a plan-stage criterion", c.id);
    if (text::trim(c.rubric).empty()) throw Error(ErrorCode::InvalidConfig, "criterion '" + c.id + "' has no rubric");
    if (!ids.insert(c.id).second) throw Error(ErrorCode::InvalidConfig, "criterion '" + c.id + "' listed twice", c.id);
  }
}

std::size_t critic_count(const CrPlanConfig& cfg) { return std::max<std::size_t>(3, cfg.criteria.size()); }

// ----------------------------------------------------------------- engine

PlanEngine::PlanEngine(const llm::LlmClient& client, CrPlanConfig cfg, const llm::PromptCatalog& prompts)
    : client_(client), cfg_(std::move(cfg)), prompts_(prompts) {
  cfg_.validate();
}

std::optional<std::string> PlanEngine::persona_system(const Persona* p) const {
  if (!cfg_.use_personas || !p) return std::nullopt;
  return prompts_.render("persona_system", {{"profession", p->profession},
                                            {"feedback_focus", p->feedback_focus},
                                            {"feedback_focus_details", p->feedback_focus_details}});
}

PersonaSet PlanEngine::create_personas(const StoryPackage& pkg) const {
  detail::Speaker who{client_, cfg_.models.critic_model, cfg_.models.critic_temperature, std::nullopt};
  auto prompt = prompts_.render("persona_creator", {{"story", plan_text(pkg)}});
  auto reminder = [&](const std::string&) { return prompts_.get("persona_reminder").body; };
  return detail::converse(who, prompt, reminder, cfg_.reprompt_limit, ErrorCode::PersonaParseFailure, "persona set",
                          [](const std::string& reply, bool) {
                            try {
                              return parse_personas(reply);
                            } catch (const Error& e) {
                              throw detail::Unparsed{e.what()};
                            }
                          });
}

Critique PlanEngine::generate_critique(const Persona* persona, const Criterion& criterion,
                                       const StoryPackage& pkg) const {
  if (criterion.stage != Stage::Plan)
    throw Error(ErrorCode::InvalidConfig, "criterion '" + criterion.id + "' is not a plan-stage criterion");
  detail::Speaker who{client_, cfg_.models.critic_model, cfg_.models.critic_temperature, persona_system(persona)};
  auto prompt = prompts_.render("critique_context", {{"story", plan_text(pkg)},
                                                     {"criterion_name", criterion.name},
                                                     {"rubric", criterion.rubric}}) +
                "\n\n" + prompts_.render("critique_creator", {{"critic_type", criterion.name}}) + "\n\n" +
                prompts_.get("critique_format").body;
  auto reminder = [&](const std::string&) { return prompts_.get("critique_reminder").body; };
  auto c = detail::converse(who, prompt, reminder, cfg_.reprompt_limit, ErrorCode::CritiqueParseFailure, "critique",
                            [](const std::string& reply, bool last) {
                              try {
                                return parse_critique(reply, last);
                              } catch (const Error& e) {
                                throw detail::Unparsed{e.what()};
                              }
                            });
  c.criterion_id = criterion.id;
  c.author = Author::machine(cfg_.use_personas && persona ? persona->profession : "critic");
  return c;
}

std::vector<Critique> PlanEngine::generate_critiques(const PersonaSet* personas, const StoryPackage& pkg) const {
  const auto n = critic_count(cfg_);
  auto persona_for = [&](std::size_t i) -> const Persona* {
    if (!personas || personas->experts.empty()) return nullptr;
    return &personas->experts[i % personas->experts.size()];
  };
  std::vector<Critique> out;
  if (client_.concurrent()) {
    std::vector<std::future<Critique>> jobs;
    for (std::size_t i = 0; i < n; ++i)
      jobs.push_back(std::async(std::launch::async, [&, i] {
        return generate_critique(persona_for(i), cfg_.criteria[i % cfg_.criteria.size()], pkg);
      }));
    for (auto& j : jobs) out.push_back(j.get());
  } else {
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(generate_critique(persona_for(i), cfg_.criteria[i % cfg_.criteria.size()], pkg));
  }
  return out;
}

LeaderDecision PlanEngine::leader_select(const std::vector<Critique>& critiques, const StoryPackage& pkg,
                                         const Persona* leader) const {
  if (critiques.empty()) throw Error(ErrorCode::EmptyCritiqueList, "leader has no critiques to choose from");
  LeaderDecision d;
  d.author = Author::machine(cfg_.use_personas && leader ? leader->profession : "leader");
  if (critiques.size() == 1) {
    d.chosen_index = 0;
    d.justification = "only one critique was presented";
    return d;
  }
  std::string questions;
  for (std::size_t i = 0; i < critiques.size(); ++i)
    questions += (i ? "\n" : "") + std::to_string(i + 1) + ") " + critiques[i].question;
  auto prompt = prompts_.render("plan_leader", {{"question_count", std::to_string(critiques.size())},
                                                {"questions", questions},
                                                {"story_plan", plan_text(pkg)}}) +
                "\n\n" + prompts_.get("plan_leader_format").body;
  detail::Speaker who{client_, cfg_.models.critic_model, cfg_.models.critic_temperature, persona_system(leader)};
  auto reminder = [&](const std::string&) { return prompts_.get("decision_reminder").body; };
  return detail::converse(who, prompt, reminder, cfg_.reprompt_limit, ErrorCode::DecisionParseFailure,
                          "leader decision", [&](const std::string& reply, bool) {
                            try {
                              d.chosen_index = parse_leader_choice(reply, critiques);
                            } catch (const Error& e) {
                              throw detail::Unparsed{e.what()};
                            }
                            d.justification = std::string(text::trim(reply));
                            return d;
                          });
}

StoryPackage PlanEngine::refine_plan(const StoryPackage& pkg, const Critique& critique) const {
  detail::Speaker who{client_, cfg_.models.critic_model, cfg_.models.critic_temperature, std::nullopt};
  auto prompt = prompts_.render("plan_refiner", {{"final_critic", critique.question}, {"story_plan", plan_text(pkg)}});
  auto reminder = [&](const std::string& why) { return prompts_.render("refine_reminder", {{"problem", why}}); };
  return detail::converse(
      who, prompt, reminder, cfg_.reprompt_limit, ErrorCode::RefinementParseFailure, "refined plan",
      [&](const std::string& reply, bool) {
        try {
          return merge_new_characters(parse_story_package(reply));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::MissingSection) throw detail::Unparsed{e.what()};
        }
        // Outline-only reply: keep the rest of the package.
        auto lines = text::split_lines(reply);
        std::size_t start = lines.size();
        for (std::size_t i = 0; i < lines.size(); ++i) {
          auto t = clean_line(lines[i]);
          if (text::istarts_with(t, "outline:")) {
            start = i + 1;
            break;
          }
          if (start == lines.size() && t.size() > 2 && t[0] == '1' && t[1] == '.') start = i;
        }
        if (start >= lines.size()) throw detail::Unparsed{"no outline found in the reply"};
        std::vector<std::string> tail(lines.begin() + static_cast<long>(start), lines.end());
        try {
          StoryPackage out = pkg;
          out.outline = parse_outline(text::join(tail, "\n"));
          if (out.outline.items.empty()) throw detail::Unparsed{"the outline is empty"};
          validate(out);
          return merge_new_characters(std::move(out));
        } catch (const Error& e) {
          throw detail::Unparsed{e.what()};
        }
      });
}

LeaderDecision PlanEngine::leaderless_decision() {
  LeaderDecision d;
  d.chosen_index = 0;
  d.justification = "no leader: every critique applied in criterion order";
  d.author = Author::machine("none");
  d.synthetic = true;
  return d;
}

std::pair<StoryPackage, std::vector<int>> PlanEngine::apply(const StoryPackage& pkg,
                                                            const std::vector<Critique>& critiques,
                                                            const LeaderDecision& decision) const {
  if (critiques.empty()) throw Error(ErrorCode::EmptyCritiqueList, "no critiques to apply");
  std::vector<int> applied;
  StoryPackage plan = pkg;
  if (decision.synthetic) {
    for (std::size_t i = 0; i < critiques.size(); ++i) {
      plan = refine_plan(plan, critiques[i]);
      applied.push_back(static_cast<int>(i));
    }
  } else {
    if (decision.chosen_index < 0 || decision.chosen_index >= static_cast<int>(critiques.size()))
      throw Error(ErrorCode::IndexOutOfRange, "decision addresses no critique", std::to_string(decision.chosen_index));
    plan = refine_plan(plan, critiques[decision.chosen_index]);
    applied.push_back(decision.chosen_index);
  }
  return {std::move(plan), std::move(applied)};
}

std::pair<int, std::string> PlanEngine::evaluate_candidates(const std::vector<StoryPackage>& candidates,
                                                            const std::string& premise) const {
  if (candidates.empty()) throw Error(ErrorCode::EmptyInput, "no candidates to evaluate");
  if (candidates.size() == 1) return {0, ""};
  const auto metrics = MetricSet::plan_evaluator();
  detail::Speaker judge{client_, cfg_.models.judge_model, cfg_.models.judge_temperature, std::nullopt};
  std::string select;
  {
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < metrics.metrics.size(); ++i)
      parts.push_back(std::to_string(i + 1) + ":[[A]] or [[B]]");
    select = "\"" + text::join(parts, ", ") + "\" where [[A]] means story plan A is better and [[B]] means story plan B is better,";
  }
  auto reminder = [&](const std::string&) {
    return prompts_.render("verdict_reminder", {{"example", "1:[[A]], 2:[[B]], 3:[[B]], 4:[[TI]]"}});
  };

  int incumbent = 0;
  std::string transcript;
  for (std::size_t j = 1; j < candidates.size(); ++j) {
    bool challenger_first = rng::keyed(cfg_.rng_seed, rng::kEvaluatorStream + j) & 1;
    int a = challenger_first ? static_cast<int>(j) : incumbent;
    int b = challenger_first ? incumbent : static_cast<int>(j);
    auto story_set = "Premise: " + premise + "\n\nStory plan A:\n" + render_outline(candidates[a].outline) +
                     "\nStory plan B:\n" + render_outline(candidates[b].outline);
    auto prompt = prompts_.render("plan_evaluator", {{"story_set", story_set}, {"select_generation", select}});
    std::string raw;
    auto verdicts = detail::converse(judge, prompt, reminder, cfg_.reprompt_limit, ErrorCode::VerdictParseFailure,
                                     "evaluator verdict", [&](const std::string& reply, bool) {
                                       raw = reply;
                                       try {
                                         return parse_verdicts(reply, metrics);
                                       } catch (const Error& e) {
                                         // A single bare token answers every question at once.
                                         static const std::regex bare(R"(\[\[\s*([A-Za-z]+)\s*\]\])");
                                         std::vector<std::string> toks;
                                         for (auto it = std::sregex_iterator(reply.begin(), reply.end(), bare);
                                              it != std::sregex_iterator(); ++it)
                                           toks.push_back((*it)[1].str());
                                         if (toks.size() == 1) {
                                           try {
                                             auto o = outcome_from_token(toks[0]);
                                             std::vector<Verdict> v;
                                             for (const auto& m : metrics.metrics) v.push_back({m.id, o});
                                             return v;
                                           } catch (const Error&) {
                                           }
                                         }
                                         throw detail::Unparsed{e.what()};
                                       }
                                     });
    int wins_a = 0, wins_b = 0;
    for (const auto& v : verdicts) {
      wins_a += v.outcome == Outcome::A;
      wins_b += v.outcome == Outcome::B;
    }
    int winner = incumbent;
    if (wins_a != wins_b) {
      int better = wins_a > wins_b ? a : b;
      if (better == static_cast<int>(j)) winner = static_cast<int>(j);
    }
    transcript += "Match " + std::to_string(j) + ": candidate " + std::to_string(a) + " as A, candidate " +
                  std::to_string(b) + " as B\n" + std::string(text::trim(raw)) + "\nWinner: candidate " +
                  std::to_string(winner) + "\n\n";
    incumbent = winner;
  }
  return {incumbent, transcript};
}

CrPlanResult PlanEngine::run(const StoryPackage& pkg, const CrPlanHooks* hooks) const {
  validate(pkg);
  CrPlanResult result;
  result.candidates.push_back(pkg);
  try {
    std::optional<PersonaSet> personas;
    if (cfg_.use_personas && cfg_.rounds > 0) personas = create_personas(pkg);
    const Persona* leader = personas ? &personas->leader : nullptr;
    StoryPackage plan = pkg;
    for (int r = 1; r <= cfg_.rounds; ++r) {
      RoundRecord rec;
      rec.round = r;
      rec.input_plan = plan;
      rec.critiques = generate_critiques(personas ? &*personas : nullptr, plan);
      if (hooks && hooks->extra_critiques) {
        auto extra = hooks->extra_critiques(r, plan, rec.critiques);
        rec.critiques.insert(rec.critiques.end(), extra.begin(), extra.end());
      }
      std::optional<LeaderDecision> chosen;
      if (hooks && hooks->leader_override) chosen = hooks->leader_override(r, rec.critiques);
      if (!chosen) chosen = cfg_.use_leader ? leader_select(rec.critiques, plan, leader) : leaderless_decision();
      rec.decision = *chosen;
      std::tie(rec.refined_plan, rec.applied) = apply(plan, rec.critiques, rec.decision);
      plan = rec.refined_plan;
      result.rounds.push_back(rec);
      result.candidates.push_back(plan);
      if (hooks && hooks->round_completed) hooks->round_completed(result.rounds.back());
    }
    auto [selected, transcript] = evaluate_candidates(result.candidates, pkg.premise);
    result.selected_index = selected;
    result.evaluator_transcript = std::move(transcript);
  } catch (const CrPlanAborted&) {
    throw;
  } catch (const Error& e) {
    throw CrPlanAborted(e, result);
  }
  return result;
}

// ------------------------------------------------------------------- json

void to_json(nlohmann::json& j, const Persona& p) {
  j = {{"profession", p.profession},
       {"feedback_focus", p.feedback_focus},
       {"feedback_focus_details", p.feedback_focus_details},
       {"role", p.role == PersonaRole::Leader ? "leader" : "expert"}};
}

void from_json(const nlohmann::json& j, Persona& p) {
  p.profession = j.at("profession").get<std::string>();
  p.feedback_focus = j.at("feedback_focus").get<std::string>();
  p.feedback_focus_details = j.at("feedback_focus_details").get<std::string>();
  p.role = j.value("role", std::string("expert")) == "leader" ? PersonaRole::Leader : PersonaRole::Expert;
}

void to_json(nlohmann::json& j, const PersonaSet& p) { j = {{"experts", p.experts}, {"leader", p.leader}}; }

void from_json(const nlohmann::json& j, PersonaSet& p) {
  p.experts = j.at("experts").get<std::vector<Persona>>();
  p.leader = j.at("leader").get<Persona>();
}

void to_json(nlohmann::json& j, const Author& a) {
  j = {{"kind", a.is_human() ? "human" : "machine"}, {"name", a.name}};
}

void from_json(const nlohmann::json& j, Author& a) {
  auto kind = j.value("kind", std::string("machine"));
  if (kind != "human" && kind != "machine") throw Error(ErrorCode::ValidationError, "author kind must be human or machine");
  a.kind = kind == "human" ? Author::Kind::Human : Author::Kind::Machine;
  a.name = j.value("name", std::string());
}

void to_json(nlohmann::json& j, const Critique& c) {
  j = {{"criterion_id", c.criterion_id},
       {"question", c.question},
       {"rationale", c.rationale},
       {"author", c.author},
       {"candidates_considered", c.candidates_considered}};
  j["edited_from"] = c.edited_from ? nlohmann::json(*c.edited_from) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, Critique& c) {
  c.criterion_id = j.value("criterion_id", std::string());
  c.question = j.at("question").get<std::string>();
  c.rationale = j.value("rationale", std::string());
  c.author = j.contains("author") ? j.at("author").get<Author>() : Author::human("");
  c.candidates_considered = j.value("candidates_considered", std::vector<std::string>{});
  if (j.contains("edited_from") && !j.at("edited_from").is_null()) c.edited_from = j.at("edited_from").get<int>();
}

void to_json(nlohmann::json& j, const LeaderDecision& d) {
  j = {{"chosen_index", d.chosen_index},
       {"justification", d.justification},
       {"author", d.author},
       {"synthetic", d.synthetic}};
}

void from_json(const nlohmann::json& j, LeaderDecision& d) {
  d.chosen_index = j.at("chosen_index").get<int>();
  d.justification = j.value("justification", std::string());
  d.author = j.contains("author") ? j.at("author").get<Author>() : Author::human("");
  d.synthetic = j.value("synthetic", false);
}

void to_json(nlohmann::json& j, const RoundRecord& r) {
  j = {{"round", r.round},         {"input_plan", r.input_plan}, {"critiques", r.critiques},
       {"decision", r.decision},   {"applied", r.applied},       {"refined_plan", r.refined_plan}};
}

void from_json(const nlohmann::json& j, RoundRecord& r) {
  r.round = j.at("round").get<int>();
  r.input_plan = j.at("input_plan").get<StoryPackage>();
  r.critiques = j.at("critiques").get<std::vector<Critique>>();
  r.decision = j.at("decision").get<LeaderDecision>();
  r.applied = j.value("applied", std::vector<int>{});
  r.refined_plan = j.at("refined_plan").get<StoryPackage>();
}

void to_json(nlohmann::json& j, const CrPlanResult& r) {
  j = {{"rounds", r.rounds},
       {"candidates", r.candidates},
       {"selected_index", r.selected_index},
       {"evaluator_transcript", r.evaluator_transcript}};
}

void from_json(const nlohmann::json& j, CrPlanResult& r) {
  r.rounds = j.at("rounds").get<std::vector<RoundRecord>>();
  r.candidates = j.at("candidates").get<std::vector<StoryPackage>>();
  r.selected_index = j.at("selected_index").get<int>();
  r.evaluator_transcript = j.value("evaluator_transcript", std::string());
}

void to_json(nlohmann::json& j, const ModelSettings& m) {
  j = {{"critic_model", m.critic_model},
       {"critic_temperature", m.critic_temperature},
       {"judge_model", m.judge_model},
       {"judge_temperature", m.judge_temperature}};
}

void from_json(const nlohmann::json& j, ModelSettings& m) {
  ModelSettings d;
  m.critic_model = j.value("critic_model", d.critic_model);
  m.critic_temperature = j.value("critic_temperature", d.critic_temperature);
  m.judge_model = j.value("judge_model", d.judge_model);
  m.judge_temperature = j.value("judge_temperature", d.judge_temperature);
}

void to_json(nlohmann::json& j, const CrPlanConfig& c) {
  j = {{"rounds", c.rounds},           {"criteria", c.criteria},
       {"use_personas", c.use_personas}, {"use_leader", c.use_leader},
       {"reprompt_limit", c.reprompt_limit}, {"rng_seed", c.rng_seed},
       {"models", c.models}};
}

void from_json(const nlohmann::json& j, CrPlanConfig& c) {
  CrPlanConfig d;
  c.rounds = j.value("rounds", d.rounds);
  c.criteria = j.contains("criteria") ? j.at("criteria").get<std::vector<Criterion>>() : d.criteria;
  c.use_personas = j.value("use_personas", d.use_personas);
  c.use_leader = j.value("use_leader", d.use_leader);
  c.reprompt_limit = j.value("reprompt_limit", d.reprompt_limit);
  c.rng_seed = j.value("rng_seed", d.rng_seed);
  c.models = j.contains("models") ? j.at("models").get<ModelSettings>() : d.models;
}

}  // namespace critics
