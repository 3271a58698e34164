#include "critics/cli.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "critics/criteria.hpp"
#include "critics/eval.hpp"
#include "critics/http_api.hpp"
#include "critics/llm/mock_backend.hpp"
#include "critics/rng.hpp"
#include "critics/session.hpp"
#include "critics/text_util.hpp"

namespace critics::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kProviderKeys = {"provider.endpoint_url", "provider.api_key_env", "provider.model",
                                                "provider.timeout_ms", "provider.response_path"};

std::vector<std::string> with_provider(std::vector<std::string> keys) {
  keys.insert(keys.end(), kProviderKeys.begin(), kProviderKeys.end());
  return keys;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read " + p.string(), p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << body;
  out.close();
  if (!out) throw Error(ErrorCode::StorageError, "cannot write " + p.string(), p.string());
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

const std::string* lookup(const Settings& s, const std::string& key) {
  auto it = s.find(key);
  return it == s.end() ? nullptr : &it->second;
}

long long int_value(const Settings& s, const std::string& key, long long fallback) {
  auto v = lookup(s, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    auto n = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument(key);
    return n;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig, key + " must be an integer", *v);
  }
}

double real_value(const Settings& s, const std::string& key, double fallback) {
  auto v = lookup(s, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    auto d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(key);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig, key + " must be a number", *v);
  }
}

bool bool_value(const Settings& s, const std::string& key, bool fallback) {
  auto v = lookup(s, key);
  if (!v) return fallback;
  auto l = text::to_lower(*v);
  if (l == "true" || l == "yes" || l == "on" || l == "1") return true;
  if (l == "false" || l == "no" || l == "off" || l == "0") return false;
  throw Error(ErrorCode::InvalidConfig, key + " must be true or false", *v);
}

std::vector<std::string> list_value(const std::string& v) {
  std::vector<std::string> out;
  for (const auto& part : text::split(v, ',')) {
    auto t = std::string(text::trim(part));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::vector<Criterion> criteria_from(const Settings& s) {
  auto catalog = builtin_criteria();
  if (auto f = lookup(s, "criteria_file")) catalog = load_criteria(*f);
  auto ids = lookup(s, "criteria");
  if (!ids) return {};
  auto list = list_value(*ids);
  if (list.empty()) throw Error(ErrorCode::InvalidConfig, "criteria is empty");
  return select_criteria(catalog, list);
}

ModelSettings models_from(const Settings& s) {
  ModelSettings m;
  if (auto v = lookup(s, "critic_model")) m.critic_model = *v;
  if (auto v = lookup(s, "judge_model")) m.judge_model = *v;
  m.critic_temperature = real_value(s, "critic_temperature", m.critic_temperature);
  m.judge_temperature = real_value(s, "judge_temperature", m.judge_temperature);
  return m;
}

std::uint64_t seed_from(const Settings& s) { return static_cast<std::uint64_t>(int_value(s, "seed", 0)); }

std::size_t jobs_from(const Settings& s) {
  auto hw = std::max(1u, std::thread::hardware_concurrency());
  auto n = int_value(s, "jobs", hw);
  if (n < 1) throw Error(ErrorCode::InvalidConfig, "jobs must be at least 1", std::to_string(n));
  return static_cast<std::size_t>(n);
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void for_each_index(std::size_t n, std::size_t jobs, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(jobs, n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

/// Output stems in input order; repeats get "-2", "-3", ...
std::vector<std::string> unique_stems(const std::vector<fs::path>& inputs) {
  std::map<std::string, int> seen;
  std::vector<std::string> out;
  for (const auto& p : inputs) {
    auto stem = p.stem().string();
    int n = ++seen[stem];
    out.push_back(n == 1 ? stem : stem + "-" + std::to_string(n));
  }
  return out;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void write_summary(const fs::path& dir, const BatchReport& report, const std::optional<Error>& fatal = {}) {
  nlohmann::json j = report;
  if (fatal) j["error"] = error_body(*fatal);
  write_file(dir / "summary.json", dump(j));
}

void prepare_output(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw Error(ErrorCode::StorageError, "cannot create output directory " + dir.string(), ec.message());
}

/// Shared driver for plan and text: validates settings up front, then runs
/// every input through `one`, recording failures per item.
template <typename Prepare, typename One>
int run_batch(const std::string& command, const RunManifest& m, const std::vector<std::string>& keys,
              Prepare&& prepare, One&& one) {
  prepare_output(m.output_dir);
  BatchReport report;
  report.command = command;
  std::size_t jobs = 1;
  try {
    check_keys(m.settings, keys);
    jobs = jobs_from(m.settings);
    if (m.inputs.empty()) throw Error(ErrorCode::EmptyInput, "no inputs given");
    prepare();
  } catch (const Error& e) {
    write_summary(m.output_dir, report, e);
    std::cerr << "critics " << command << ": " << e.what() << "\n";
    return 2;
  }
  auto stems = unique_stems(m.inputs);
  report.items.resize(m.inputs.size());
  for_each_index(m.inputs.size(), jobs, [&](std::size_t i) {
    auto& item = report.items[i];
    item.input = m.inputs[i].string();
    try {
      one(m.inputs[i], stems[i], item);
      item.ok = true;
    } catch (const Error& e) {
      item.error = e;
    } catch (const std::exception& e) {
      item.error = Error(ErrorCode::StorageError, e.what());
    }
  });
  write_summary(m.output_dir, report);
  for (const auto& item : report.items)
    if (item.error) std::cerr << item.input << ": " << to_string(item.error->code()) << ": " << item.error->what() << "\n";
  return report.failures() == 0 ? 0 : 1;
}

Outcome label_from(const std::string& s) {
  try {
    return parse_outcome(s);
  } catch (const Error&) {
    return outcome_from_token(s);
  }
}

}  // namespace

Settings parse_config_text(std::string_view text) {
  Settings out;
  std::string section;
  int line_no = 0;
  for (const auto& raw : text::split(text, '\n')) {
    ++line_no;
    auto line = std::string(text::trim(raw));
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw Error(ErrorCode::InvalidConfig, "bad section header on line " + std::to_string(line_no), line);
      section = std::string(text::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidConfig, "expected key = value on line " + std::to_string(line_no), line);
    auto key = std::string(text::trim(line.substr(0, eq)));
    std::replace(key.begin(), key.end(), '-', '_');
    if (key.empty()) throw Error(ErrorCode::InvalidConfig, "empty key on line " + std::to_string(line_no), line);
    if (!section.empty()) key = section + "." + key;
    out[key] = unquote(std::string(text::trim(line.substr(eq + 1))));
  }
  return out;
}

Settings load_config_file(const fs::path& file) { return parse_config_text(read_file(file)); }

Settings merge(Settings file, const Settings& flags) {
  for (const auto& [k, v] : flags) file[k] = v;
  return file;
}

void check_keys(const Settings& s, const std::vector<std::string>& allowed) {
  for (const auto& [k, _] : s)
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw Error(ErrorCode::InvalidConfig, "unknown setting '" + k + "'", k);
}

const std::vector<std::string>& plan_keys() {
  static const auto keys = with_provider({"rounds", "criteria", "criteria_file", "leader", "personas", "seed",
                                          "mock_script", "jobs", "reprompt_limit", "critic_model",
                                          "critic_temperature", "judge_model", "judge_temperature"});
  return keys;
}

const std::vector<std::string>& text_keys() {
  static const auto keys =
      with_provider({"rounds", "window", "criteria", "criteria_file", "leader", "seed", "mock_script", "jobs",
                     "reprompt_limit", "critic_model", "critic_temperature"});
  return keys;
}

const std::vector<std::string>& eval_keys() {
  static const auto keys = with_provider({"seed", "mock_script", "jobs", "judge_model", "judge_temperature"});
  return keys;
}

CrPlanConfig plan_config(const Settings& s) {
  CrPlanConfig c;
  c.rounds = static_cast<int>(int_value(s, "rounds", c.rounds));
  if (auto crit = criteria_from(s); !crit.empty()) c.criteria = std::move(crit);
  c.use_leader = bool_value(s, "leader", c.use_leader);
  c.use_personas = bool_value(s, "personas", c.use_personas);
  c.rng_seed = seed_from(s);
  c.reprompt_limit = static_cast<int>(int_value(s, "reprompt_limit", c.reprompt_limit));
  c.models = models_from(s);
  c.validate();
  return c;
}

CrTextConfig text_config(const Settings& s) {
  CrTextConfig c;
  c.rounds = static_cast<int>(int_value(s, "rounds", c.rounds));
  c.context_window = static_cast<int>(int_value(s, "window", c.context_window));
  c.use_leader = bool_value(s, "leader", c.use_leader);
  c.rng_seed = seed_from(s);
  c.reprompt_limit = static_cast<int>(int_value(s, "reprompt_limit", c.reprompt_limit));
  c.models = models_from(s);
  c.extra_criteria = criteria_from(s);
  c.validate();
  return c;
}

llm::ProviderConfig provider_config(const Settings& s) {
  llm::ProviderConfig p;
  if (auto v = lookup(s, "provider.endpoint_url")) p.endpoint_url = *v;
  if (auto v = lookup(s, "provider.api_key_env")) p.api_key_env = *v;
  if (auto v = lookup(s, "provider.model")) p.default_model = *v;
  if (auto v = lookup(s, "provider.response_path")) p.response_path = *v;
  p.timeout_ms = static_cast<int>(int_value(s, "provider.timeout_ms", p.timeout_ms));
  return p;
}

llm::LlmClient make_client(const Settings& s) {
  if (auto script = lookup(s, "mock_script"))
    return llm::LlmClient(std::make_shared<llm::MockBackend>(llm::MockBackend::load_script(*script), "mock"));
  return llm::LlmClient(std::make_shared<llm::HttpBackend>(provider_config(s)));
}

std::size_t BatchReport::failures() const {
  return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const auto& i) { return !i.ok; }));
}

void to_json(nlohmann::json& j, const ItemReport& r) {
  j = {{"input", r.input}, {"ok", r.ok}, {"outputs", r.outputs}};
  if (r.error) j["error"] = error_body(*r.error);
}

void to_json(nlohmann::json& j, const BatchReport& r) {
  j = {{"command", r.command},
       {"items", r.items},
       {"succeeded", r.items.size() - r.failures()},
       {"failed", r.failures()}};
}

int cmd_plan(const RunManifest& m) {
  CrPlanConfig cfg;
  return run_batch(
      "plan", m, plan_keys(), [&] { cfg = plan_config(m.settings); },
      [&](const fs::path& input, const std::string& stem, ItemReport& item) {
        auto pkg = parse_story_package(read_file(input));
        auto client = make_client(m.settings);
        PlanEngine engine(client, cfg);
        auto result_name = stem + ".result.json";
        try {
          auto result = engine.run(pkg);
          write_file(m.output_dir / result_name, dump(result));
          item.outputs.push_back(result_name);
          auto plan_name = stem + ".plan.txt";
          write_file(m.output_dir / plan_name, render_story_package(result.candidates.at(result.selected_index)));
          item.outputs.push_back(plan_name);
        } catch (const CrPlanAborted& e) {
          write_file(m.output_dir / result_name, dump(e.partial()));
          item.outputs.push_back(result_name);
          throw;
        }
      });
}

int cmd_text(const RunManifest& m) {
  CrTextConfig cfg;
  return run_batch(
      "text", m, text_keys(), [&] { cfg = text_config(m.settings); },
      [&](const fs::path& input, const std::string& stem, ItemReport& item) {
        auto story = segment_sentences(read_file(input));
        auto client = make_client(m.settings);
        TextEngine engine(client, cfg);
        auto result = engine.run(story);
        auto result_name = stem + ".result.json";
        write_file(m.output_dir / result_name, dump(result));
        item.outputs.push_back(result_name);
        auto story_name = stem + ".story.txt";
        write_file(m.output_dir / story_name, result.output.body);
        item.outputs.push_back(story_name);
      });
}

int cmd_eval(const fs::path& manifest, const fs::path& output_dir, const Settings& settings) {
  prepare_output(output_dir);
  BatchReport report;
  report.command = "eval";

  struct Pair {
    std::string id, a, b;
    std::map<std::string, std::vector<Outcome>> human;
  };
  std::vector<Pair> pairs;
  MetricSet metrics;
  JudgeSettings judge;
  std::size_t jobs = 1;
  try {
    check_keys(settings, eval_keys());
    jobs = jobs_from(settings);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_file(manifest));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, "eval manifest is not valid JSON", e.what());
    }
    auto base = manifest.parent_path();
    metrics = parse_stage(doc.value("stage", std::string("plan"))) == Stage::Plan ? MetricSet::plan() : MetricSet::text();
    judge.model = lookup(settings, "judge_model") ? *lookup(settings, "judge_model") : judge.model;
    judge.temperature = real_value(settings, "judge_temperature", judge.temperature);
    auto item = [&](const nlohmann::json& p, const std::string& side) {
      if (p.contains(side + "_text")) return p.at(side + "_text").get<std::string>();
      if (!p.contains(side)) throw Error(ErrorCode::InvalidConfig, "pair is missing '" + side + "'");
      return read_file(base / p.at(side).get<std::string>());
    };
    auto listed = doc.value("pairs", nlohmann::json::array());
    for (const auto& p : listed) {
      Pair pair;
      pair.id = p.value("id", "pair-" + std::to_string(pairs.size() + 1));
      pair.a = item(p, "a");
      pair.b = item(p, "b");
      auto human = p.value("human", nlohmann::json::object());
      for (const auto& [who, labels] : human.items()) {
        auto& out = pair.human[who];
        for (const auto& l : labels) out.push_back(label_from(l.get<std::string>()));
        if (out.size() != metrics.metrics.size())
          throw Error(ErrorCode::LengthMismatch, "annotator " + who + " must label every metric of " + pair.id, who);
      }
      pairs.push_back(std::move(pair));
    }
    if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "eval manifest has no pairs");
    std::set<std::string> annotators;
    for (const auto& [who, _] : pairs.front().human) annotators.insert(who);
    for (const auto& p : pairs) {
      std::set<std::string> here;
      for (const auto& [who, _] : p.human) here.insert(who);
      if (here != annotators)
        throw Error(ErrorCode::LengthMismatch, "every pair needs labels from the same annotators", p.id);
    }
  } catch (const nlohmann::json::exception& e) {
    auto err = Error(ErrorCode::InvalidConfig, "malformed eval manifest", e.what());
    write_summary(output_dir, report, err);
    std::cerr << "critics eval: " << err.what() << "\n";
    return 2;
  } catch (const Error& e) {
    write_summary(output_dir, report, e);
    std::cerr << "critics eval: " << e.what() << "\n";
    return 2;
  }

  auto seed = seed_from(settings);
  std::vector<std::optional<VerdictSet>> sets(pairs.size());
  report.items.resize(pairs.size());
  for_each_index(pairs.size(), jobs, [&](std::size_t i) {
    auto& item = report.items[i];
    item.input = pairs[i].id;
    try {
      auto client = make_client(settings);
      sets[i] = judge_pair(client, llm::PromptCatalog::builtin(), pairs[i].a, pairs[i].b, metrics,
                           rng::keyed(seed, i), pairs[i].id, judge);
      item.ok = true;
      item.outputs = {"win_rates.json"};
    } catch (const Error& e) {
      item.error = e;
    }
  });

  std::vector<VerdictSet> judged;
  std::map<std::string, std::vector<Outcome>> raters;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!sets[i]) continue;
    judged.push_back(*sets[i]);
    for (const auto& v : sets[i]->verdicts) raters["judge"].push_back(v.outcome);
    for (const auto& [who, labels] : pairs[i].human) raters[who].insert(raters[who].end(), labels.begin(), labels.end());
  }
  if (!judged.empty()) {
    write_file(output_dir / "win_rates.json",
               dump({{"verdicts", judged}, {"win_rates", aggregate_win_rates(judged, metrics)}}));
    write_file(output_dir / "agreement.json", dump(nlohmann::json(agreement_report(raters))));
  }
  write_summary(output_dir, report);
  for (const auto& item : report.items)
    if (item.error) std::cerr << item.input << ": " << to_string(item.error->code()) << ": " << item.error->what() << "\n";
  return report.failures() == 0 ? 0 : 1;
}

int cmd_serve(const ServeOptions& opts) {
  auto keys = with_provider({"mock_script"});
  check_keys(opts.settings, keys);
  // One shared client: the service serializes calls per session, and a shared
  // mock keeps consuming one script across sessions.
  auto client = make_client(opts.settings);
  SessionService service(client, opts.data_dir);
  ServerOptions so;
  so.host = opts.host;
  so.port = opts.port;
  so.ui_dir = opts.ui_dir;
  ApiServer server(service, so);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  server.bind();
  std::cerr << "critics serve: listening on http://" << opts.host << ":" << server.port() << " (data "
            << opts.data_dir.string() << ")\n";
  std::thread listener([&] { server.run(); });
  if (opts.on_listening) {
    httplib::Client probe(opts.host, server.port());
    for (int i = 0; i < 400 && !probe.Get("/"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    opts.on_listening(server.port());
  }
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  listener.join();
  // Every mutation was already persisted before it was acknowledged.
  std::cerr << "critics serve: stopped, " << service.list().size() << " session(s) on disk\n";
  return 0;
}

}  // namespace critics::cli
