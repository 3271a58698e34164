#include "critics/crtext.hpp"

#include <algorithm>
#include <future>

#include "critics/rng.hpp"
#include "critics/text_util.hpp"
#include "dialogue.hpp"

namespace critics {

namespace {

bool starts_with_quote(std::string_view s) {
  s = text::trim(s);
  return !s.empty() && (s.front() == '"' || s.front() == '\'' || s.substr(0, 3) == "\xE2\x80\x9C");
}

std::string strip_wrapping_quotes(std::string s) {
  auto t = std::string(text::trim(s));
  auto strip = [&](std::string_view open, std::string_view close) {
    if (t.size() >= open.size() + close.size() + 1 && t.compare(0, open.size(), open) == 0 &&
        t.compare(t.size() - close.size(), close.size(), close) == 0) {
      t = std::string(text::trim(std::string_view(t).substr(open.size(), t.size() - open.size() - close.size())));
      return true;
    }
    return false;
  };
  strip("\"", "\"") || strip("\xE2\x80\x9C", "\xE2\x80\x9D");
  return t;
}

int key_at(const std::string& line, std::initializer_list<std::string_view> keys, std::string& rest) {
  int i = 0;
  for (auto key : keys) {
    if (text::istarts_with(line, key)) {
      auto after = text::trim(std::string_view(line).substr(key.size()));
      if (!after.empty() && after.front() == ':') {
        rest = std::string(text::trim(after.substr(1)));
        return i;
      }
    }
    ++i;
  }
  return -1;
}

std::string describe(const RevisionSuggestion& s) {
  return "Original Sentence: " + s.original + "\nSuggested Revision: \"" + s.replacement +
         "\"\nReason for Change: " + s.reason;
}

std::string squash_lower(std::string_view s) { return text::squash(text::to_lower(s)); }

const SentenceSpan& span_at(const StoryText& story, int ordinal) {
  for (const auto& s : story.sentence_index)
    if (s.ordinal == ordinal) return s;
  throw Error(ErrorCode::SpanNotFound, "no sentence with ordinal " + std::to_string(ordinal));
}

}  // namespace

void CrTextConfig::validate() const {
  if (rounds < 0) throw Error(ErrorCode::InvalidConfig, "rounds must be >= 0");
  if (context_window < 0) throw Error(ErrorCode::InvalidConfig, "context_window must be >= 0");
  if (reprompt_limit < 1) throw Error(ErrorCode::InvalidConfig, "reprompt_limit must be >= 1");
  for (const auto& c : extra_criteria)
    if (c.stage != Stage::Text)
      throw Error(ErrorCode::InvalidConfig, "criterion '" + c.id + "' is not a text-stage criterion", c.id);
}

std::vector<RevisionSuggestion> CrTextRound::suggestions() const {
  std::vector<RevisionSuggestion> out{image, voice};
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

SentenceSpan sample_sentence(const StoryText& story, std::uint64_t rng_seed, int round, const std::set<int>& revised) {
  if (story.sentence_index.empty()) throw Error(ErrorCode::NoSentences, "story has no sentences");
  std::vector<const SentenceSpan*> pool;
  for (const auto& s : story.sentence_index)
    if (!revised.contains(s.ordinal)) pool.push_back(&s);
  if (pool.empty())
    for (const auto& s : story.sentence_index) pool.push_back(&s);
  auto draw = rng::keyed(rng_seed, rng::kSentenceStream + static_cast<std::uint64_t>(round));
  return *pool[rng::bounded(draw, pool.size())];
}

std::string context_window(const StoryText& story, const SentenceSpan& target, int window) {
  const auto& idx = story.sentence_index;
  auto it = std::find(idx.begin(), idx.end(), target);
  if (it == idx.end()) throw Error(ErrorCode::SpanNotFound, "target is not a sentence of the story");
  auto k = static_cast<long>(it - idx.begin());
  auto lo = std::max<long>(0, k - window);
  auto hi = std::min<long>(static_cast<long>(idx.size()) - 1, k + window);
  return story.body.substr(idx[lo].start, idx[hi].end - idx[lo].start);
}

const std::vector<std::string>& feature_words(std::string_view criterion_id) {
  static const std::vector<std::string> image = {"insight", "see", "saw", "visual", "hear", "sound",
                                                 "feel", "touch", "body", "bodily"};
  static const std::vector<std::string> voice = {"informal", "unusual word", "sentence structure", "punctuation",
                                                 "authentic", "netspeak", "nonfluenc"};
  static const std::vector<std::string> none;
  if (criterion_id == kImageCriterion) return image;
  if (criterion_id == kVoiceCriterion) return voice;
  return none;
}

RevisionSuggestion parse_suggestion(std::string_view reply, std::string_view target, std::string_view criterion_id,
                                    bool require_feature) {
  std::string original, replacement, reason;
  std::string* field = nullptr;
  for (const auto& raw : text::split_lines(reply)) {
    auto line = text::strip_decoration(text::trim(raw));
    while (!line.empty() && (line.front() == '-' || line.front() == '*' || line.front() == '#'))
      line = text::strip_decoration(text::trim(std::string_view(line).substr(1)));
    if (line.empty()) continue;
    std::string rest;
    int k = key_at(line, {"original sentence", "original"}, rest);
    if (k >= 0) {
      original = rest;
      field = &original;
      continue;
    }
    k = key_at(line, {"suggested revision", "revised sentence", "revision"}, rest);
    if (k >= 0) {
      if (!replacement.empty()) break;  // only the first suggestion counts
      replacement = rest;
      field = &replacement;
      continue;
    }
    k = key_at(line, {"reason for change", "reason", "explanation"}, rest);
    if (k >= 0) {
      reason = rest;
      field = &reason;
      continue;
    }
    if (field && field != &original) {
      if (!field->empty()) *field += ' ';
      *field += line;
    }
  }
  replacement = std::string(text::trim(replacement));
  if (!starts_with_quote(target)) replacement = strip_wrapping_quotes(replacement);
  if (replacement.empty())
    throw Error(ErrorCode::SuggestionParseFailure, "reply has no Suggested Revision", "Suggested Revision");
  if (require_feature) {
    const auto& words = feature_words(criterion_id);
    bool named = words.empty() ? !text::trim(reason).empty() : false;
    for (const auto& w : words)
      if (text::ifind(reason, w) != std::string::npos) named = true;
    if (!named)
      throw Error(ErrorCode::SuggestionParseFailure, "the reason does not name a creativity feature",
                  std::string(criterion_id));
  }
  RevisionSuggestion s;
  s.criterion_id = std::string(criterion_id);
  s.original = std::string(text::trim(target));
  s.replacement = replacement;
  s.reason = std::string(text::trim(reason));
  return s;
}

int parse_revision_choice(std::string_view reply, const std::vector<RevisionSuggestion>& suggestions) {
  const int n = static_cast<int>(suggestions.size());
  auto matches = [&](std::string_view hay) {
    std::vector<int> hits;
    auto flat = squash_lower(hay);
    for (int i = 0; i < n; ++i) {
      auto r = squash_lower(strip_wrapping_quotes(suggestions[i].replacement));
      if (!r.empty() && flat.find(r) != std::string::npos) hits.push_back(i);
    }
    // A replacement that is a substring of another one is shadowed by it.
    if (hits.size() > 1) {
      std::vector<int> longest;
      for (int i : hits) {
        bool inside = false;
        for (int j : hits)
          if (j != i && suggestions[j].replacement.size() > suggestions[i].replacement.size() &&
              squash_lower(suggestions[j].replacement).find(squash_lower(suggestions[i].replacement)) !=
                  std::string::npos)
            inside = true;
        if (!inside) longest.push_back(i);
      }
      hits = longest;
    }
    return hits;
  };
  // The "Selected:" line wins over quotes elsewhere in the reply.
  for (const auto& raw : text::split_lines(reply)) {
    auto line = text::strip_decoration(text::trim(raw));
    std::string rest;
    if (key_at(line, {"selected", "selection", "chosen"}, rest) < 0) continue;
    auto hits = matches(rest);
    if (hits.size() == 1) return hits[0];
    auto low = text::to_lower(rest);
    bool img = low.find("image") != std::string::npos, voi = low.find("voice") != std::string::npos;
    if (img != voi) return img ? 0 : 1;
  }
  auto hits = matches(reply);
  if (hits.size() == 1) return hits[0];
  auto low = text::to_lower(reply);
  bool img = low.find("image") != std::string::npos, voi = low.find("voice") != std::string::npos;
  if (hits.empty() && img != voi) return img ? 0 : 1;
  throw Error(ErrorCode::DecisionParseFailure, "could not tell which revision the leader chose",
              hits.size() > 1 ? "several revisions quoted" : "no revision quoted");
}

TextEngine::TextEngine(const llm::LlmClient& client, CrTextConfig cfg, const llm::PromptCatalog& prompts)
    : client_(client), cfg_(std::move(cfg)), prompts_(prompts) {
  cfg_.validate();
}

RevisionSuggestion TextEngine::critique(const std::string& prompt_id, const Criterion* criterion,
                                        std::string_view criterion_id, const std::string& target,
                                        const std::string& context) const {
  llm::Bindings b{{"text", target}};
  if (criterion) {
    b["criterion_name"] = criterion->name;
    b["rubric"] = criterion->rubric;
  }
  auto prompt = prompts_.render(prompt_id, b) + "\n\n" + prompts_.render("revision_format", {{"context", context}});
  const auto& words = feature_words(criterion_id);
  auto features = words.empty() ? (criterion ? criterion->name : std::string(criterion_id)) : text::join(words, ", ");
  auto reminder = [&](const std::string&) { return prompts_.render("suggestion_reminder", {{"features", features}}); };
  detail::Speaker who{client_, cfg_.models.critic_model, cfg_.models.critic_temperature, std::nullopt};
  auto s = detail::converse(who, prompt, reminder, cfg_.reprompt_limit, ErrorCode::SuggestionParseFailure,
                            std::string(criterion_id) + " suggestion", [&](const std::string& reply, bool last) {
                              try {
                                return parse_suggestion(reply, target, criterion_id, !last);
                              } catch (const Error& e) {
                                throw detail::Unparsed{e.what()};
                              }
                            });
  s.author = Author::machine(std::string(criterion_id) + " critic");
  return s;
}

RevisionSuggestion TextEngine::image_critique(const std::string& target, const std::string& context) const {
  return critique("image_critic", nullptr, kImageCriterion, target, context);
}

RevisionSuggestion TextEngine::voice_critique(const std::string& target, const std::string& context) const {
  return critique("voice_critic", nullptr, kVoiceCriterion, target, context);
}

RevisionSuggestion TextEngine::criterion_critique(const Criterion& criterion, const std::string& target,
                                                  const std::string& context) const {
  return critique("text_criterion_critic", &criterion, criterion.id, target, context);
}

std::vector<RevisionSuggestion> TextEngine::critique_all(const std::string& target, const std::string& context) const {
  std::vector<std::function<RevisionSuggestion()>> jobs;
  jobs.push_back([&] { return image_critique(target, context); });
  jobs.push_back([&] { return voice_critique(target, context); });
  for (const auto& c : cfg_.extra_criteria) jobs.push_back([&, c] { return criterion_critique(c, target, context); });
  std::vector<RevisionSuggestion> out;
  if (client_.concurrent()) {
    std::vector<std::future<RevisionSuggestion>> running;
    for (auto& j : jobs) running.push_back(std::async(std::launch::async, j));
    for (auto& f : running) out.push_back(f.get());
  } else {
    for (auto& j : jobs) out.push_back(j());
  }
  return out;
}

LeaderDecision TextEngine::leader_select_revision(const std::vector<RevisionSuggestion>& suggestions,
                                                  const std::string& context) const {
  if (suggestions.empty()) throw Error(ErrorCode::EmptyCritiqueList, "leader has no revisions to choose from");
  LeaderDecision d;
  d.author = Author::machine("leader");
  bool identical = std::all_of(suggestions.begin(), suggestions.end(), [&](const RevisionSuggestion& s) {
    return squash_lower(s.replacement) == squash_lower(suggestions[0].replacement);
  });
  if (identical) {
    d.chosen_index = 0;
    d.justification = "all suggested revisions are identical";
    return d;
  }
  if (suggestions.size() < 2)
    throw Error(ErrorCode::InvalidConfig, "the text leader needs an image and a voice suggestion");
  std::string extra;
  for (std::size_t i = 2; i < suggestions.size(); ++i)
    extra += "<Refinements set related to '" + suggestions[i].criterion_id + "'>\n" + describe(suggestions[i]) + "\n";
  auto prompt = prompts_.render("text_leader", {{"image_refinement", describe(suggestions[0])},
                                                {"voice_refinement", describe(suggestions[1])}}) +
                "\n\n" +
                prompts_.render("text_leader_format",
                                {{"context", "Original story excerpt:\n" + context}, {"extra_refinements", extra}});
  detail::Speaker who{client_, cfg_.models.critic_model, cfg_.models.critic_temperature, std::nullopt};
  auto reminder = [&](const std::string&) { return prompts_.render("revision_reminder", {}); };
  return detail::converse(who, prompt, reminder, cfg_.reprompt_limit, ErrorCode::DecisionParseFailure,
                          "revision choice", [&](const std::string& reply, bool) {
                            try {
                              d.chosen_index = parse_revision_choice(reply, suggestions);
                            } catch (const Error& e) {
                              throw detail::Unparsed{e.what()};
                            }
                            d.justification = std::string(text::trim(reply));
                            return d;
                          });
}

CrTextRound TextEngine::propose(const StoryText& story, int round, const std::set<int>& revised) const {
  CrTextRound rec;
  rec.round = round;
  rec.target = sample_sentence(story, cfg_.rng_seed, round, revised);
  auto target = std::string(story.sentence(rec.target));
  if (cfg_.use_leader) {
    auto ctx = context_window(story, rec.target, cfg_.context_window);
    auto all = critique_all(target, ctx);
    rec.image = all[0];
    rec.voice = all[1];
    rec.extra.assign(all.begin() + 2, all.end());
    return rec;
  }
  // Leaderless: every critic revises the previous critic's output.
  StoryText cur = story;
  std::string text = target;
  auto step = [&](auto&& critic) {
    const auto& span = span_at(cur, rec.target.ordinal);
    auto s = critic(text, context_window(cur, span, cfg_.context_window));
    cur = replace_span(cur, span, s.replacement);
    text = std::string(cur.sentence(span_at(cur, rec.target.ordinal)));
    rec.applied.push_back(static_cast<int>(rec.applied.size()));
    return s;
  };
  rec.image = step([&](const std::string& t, const std::string& c) { return image_critique(t, c); });
  rec.voice = step([&](const std::string& t, const std::string& c) { return voice_critique(t, c); });
  for (const auto& crit : cfg_.extra_criteria)
    rec.extra.push_back(step([&](const std::string& t, const std::string& c) { return criterion_critique(crit, t, c); }));
  rec.decision = PlanEngine::leaderless_decision();
  rec.decision.justification = "no leader: every revision applied in criterion order";
  rec.output = std::move(cur);
  return rec;
}

void TextEngine::finish(const StoryText& story, CrTextRound& rec) const {
  if (rec.decision.synthetic) return;  // already applied by propose
  auto all = rec.suggestions();
  if (rec.decision.chosen_index < 0 || rec.decision.chosen_index >= static_cast<int>(all.size()))
    throw Error(ErrorCode::IndexOutOfRange, "decision addresses no suggestion", std::to_string(rec.decision.chosen_index));
  rec.output = replace_span(story, rec.target, all[rec.decision.chosen_index].replacement);
  rec.applied = {rec.decision.chosen_index};
}

CrTextRound TextEngine::run_round(const StoryText& story, int round, const std::set<int>& revised,
                                  const CrTextHooks* hooks) const {
  auto rec = propose(story, round, revised);
  if (rec.decision.synthetic) return rec;
  if (hooks && hooks->extra_suggestions) {
    auto more = hooks->extra_suggestions(round, rec.target, context_window(story, rec.target, cfg_.context_window));
    rec.extra.insert(rec.extra.end(), more.begin(), more.end());
  }
  std::optional<LeaderDecision> d;
  if (hooks && hooks->leader_override) d = hooks->leader_override(round, rec.suggestions());
  rec.decision = d ? *d : leader_select_revision(rec.suggestions(), context_window(story, rec.target, cfg_.context_window));
  finish(story, rec);
  return rec;
}

CrTextResult TextEngine::run(const StoryText& story, const CrTextHooks* hooks) const {
  CrTextResult result;
  result.output = story;
  std::set<int> revised;
  try {
    if (cfg_.rounds > 0 && story.sentence_index.empty()) throw Error(ErrorCode::NoSentences, "story has no sentences");
    for (int r = 1; r <= cfg_.rounds; ++r) {
      auto rec = run_round(result.output, r, revised, hooks);
      revised.insert(rec.target.ordinal);
      result.output = rec.output;
      result.rounds.push_back(std::move(rec));
      if (hooks && hooks->round_completed) hooks->round_completed(result.rounds.back());
    }
  } catch (const CrTextAborted&) {
    throw;
  } catch (const Error& e) {
    throw CrTextAborted(e, result);
  }
  return result;
}

void to_json(nlohmann::json& j, const RevisionSuggestion& s) {
  j = {{"criterion_id", s.criterion_id},
       {"original", s.original},
       {"replacement", s.replacement},
       {"reason", s.reason},
       {"author", s.author}};
}

void from_json(const nlohmann::json& j, RevisionSuggestion& s) {
  s.criterion_id = j.value("criterion_id", std::string());
  s.original = j.value("original", std::string());
  s.replacement = j.at("replacement").get<std::string>();
  s.reason = j.value("reason", std::string());
  s.author = j.contains("author") ? j.at("author").get<Author>() : Author::human("");
}

void to_json(nlohmann::json& j, const CrTextRound& r) {
  j = {{"round", r.round},   {"target", r.target},     {"image", r.image},   {"voice", r.voice},
       {"extra", r.extra},   {"decision", r.decision}, {"applied", r.applied}, {"output", r.output}};
}

void from_json(const nlohmann::json& j, CrTextRound& r) {
  r.round = j.at("round").get<int>();
  r.target = j.at("target").get<SentenceSpan>();
  r.image = j.at("image").get<RevisionSuggestion>();
  r.voice = j.at("voice").get<RevisionSuggestion>();
  r.extra = j.value("extra", std::vector<RevisionSuggestion>{});
  r.decision = j.at("decision").get<LeaderDecision>();
  r.applied = j.value("applied", std::vector<int>{});
  r.output = j.at("output").get<StoryText>();
}

void to_json(nlohmann::json& j, const CrTextResult& r) { j = {{"output", r.output}, {"rounds", r.rounds}}; }

void from_json(const nlohmann::json& j, CrTextResult& r) {
  r.output = j.at("output").get<StoryText>();
  r.rounds = j.at("rounds").get<std::vector<CrTextRound>>();
}

void to_json(nlohmann::json& j, const CrTextConfig& c) {
  j = {{"rounds", c.rounds},         {"context_window", c.context_window}, {"use_leader", c.use_leader},
       {"rng_seed", c.rng_seed},     {"reprompt_limit", c.reprompt_limit}, {"models", c.models},
       {"extra_criteria", c.extra_criteria}};
}

void from_json(const nlohmann::json& j, CrTextConfig& c) {
  CrTextConfig d;
  c.rounds = j.value("rounds", d.rounds);
  c.context_window = j.value("context_window", d.context_window);
  c.use_leader = j.value("use_leader", d.use_leader);
  c.rng_seed = j.value("rng_seed", d.rng_seed);
  c.reprompt_limit = j.value("reprompt_limit", d.reprompt_limit);
  c.models = j.contains("models") ? j.at("models").get<ModelSettings>() : d.models;
  c.extra_criteria = j.value("extra_criteria", std::vector<Criterion>{});
}

}  // namespace critics
