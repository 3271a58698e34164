#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include <CLI11.hpp>

#include "critics/cli.hpp"

namespace fs = std::filesystem;
using critics::cli::Settings;

namespace {

// Flag values land in `flags` only when given, so config-file values survive.
struct FlagSink {
  Settings flags;

  void string(CLI::App* app, const std::string& name, const std::string& help) {
    auto key = name;
    std::replace(key.begin(), key.end(), '-', '_');
    app->add_option_function<std::string>("--" + name, [this, key](const std::string& v) { flags[key] = v; }, help);
  }
  void negated(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    app->add_flag_callback("--" + name, [this, key] { flags[key] = "false"; }, help);
  }
};

struct Common {
  std::optional<fs::path> config;
  FlagSink sink;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "key = value settings file; flags override it")->check(CLI::ExistingFile);
    sink.string(app, "seed", "RNG seed for sampling and presentation order");
    sink.string(app, "mock-script", "scripted mock provider (JSON) instead of the HTTP provider");
    sink.string(app, "jobs", "inputs processed in parallel (default: logical CPUs)");
  }

  Settings settings() const {
    Settings file = config ? critics::cli::load_config_file(*config) : Settings{};
    return critics::cli::merge(std::move(file), sink.flags);
  }
};

using Flag = std::pair<const char*, const char*>;

const Flag kPlanFlags[] = {
    {"rounds", "critique rounds (default 3)"},
    {"criteria", "comma-separated criterion ids for the critics"},
    {"criteria-file", "criterion catalog JSON to pick ids from"},
    {"reprompt-limit", "attempts per call when a reply does not parse"},
    {"critic-model", "model for critics, leader and refiner"},
    {"critic-temperature", "sampling temperature for the critic model"},
    {"judge-model", "model for the candidate evaluator"},
    {"judge-temperature", "sampling temperature for the evaluator"},
};

const Flag kTextFlags[] = {
    {"rounds", "sentences revised (default 3)"},
    {"window", "context sentences on each side of the target (default 5)"},
    {"criteria", "extra text-stage criterion ids"},
    {"criteria-file", "criterion catalog JSON to pick ids from"},
    {"reprompt-limit", "attempts per call when a reply does not parse"},
    {"critic-model", "model for critics and leader"},
    {"critic-temperature", "sampling temperature for the critic model"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"critics: collective critique for story plans and story text"};
  app.require_subcommand(1);

  std::vector<fs::path> inputs;
  fs::path output_dir = "critics-out";

  Common plan_opts;
  auto* plan = app.add_subcommand("plan", "refine story packages over critique rounds");
  plan->add_option("inputs", inputs, "story package files")->required()->check(CLI::ExistingFile);
  plan->add_option("-o,--output-dir", output_dir, "where results go");
  plan_opts.attach(plan);
  for (auto [name, help] : kPlanFlags) plan_opts.sink.string(plan, name, help);
  plan_opts.sink.negated(plan, "no-leader", "leader", "apply every critique instead of picking one");
  plan_opts.sink.negated(plan, "no-personas", "personas", "critics without personas");

  Common text_opts;
  auto* text = app.add_subcommand("text", "revise one sentence per round for expressiveness");
  text->add_option("inputs", inputs, "story text files")->required()->check(CLI::ExistingFile);
  text->add_option("-o,--output-dir", output_dir, "where results go");
  text_opts.attach(text);
  for (auto [name, help] : kTextFlags) text_opts.sink.string(text, name, help);
  text_opts.sink.negated(text, "no-leader", "leader", "chain every suggestion instead of picking one");

  Common eval_opts;
  fs::path manifest;
  auto* eval = app.add_subcommand("eval", "pairwise judge evaluation with win rates and agreement");
  eval->add_option("manifest", manifest, "eval manifest JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("-o,--output-dir", output_dir, "where results go");
  eval_opts.attach(eval);
  eval_opts.sink.string(eval, "judge-model", "judge model name");
  eval_opts.sink.string(eval, "judge-temperature", "judge sampling temperature");

  std::optional<fs::path> serve_config;
  critics::cli::ServeOptions serve_opts;
  FlagSink serve_flags;
  std::optional<fs::path> data_dir;
  auto* serve = app.add_subcommand("serve", "serve the session API and the writer UI");
  serve->add_option("--host", serve_opts.host, "bind address");
  serve->add_option("--port", serve_opts.port, "port (0 picks a free one)");
  serve->add_option("--data-dir", data_dir, "session storage (default: $CRITICS_DATA_DIR or ./critics-data)");
  serve->add_option("--ui-dir", serve_opts.ui_dir, "built UI bundle to mount at /")->check(CLI::ExistingDirectory);
  serve->add_option("--config", serve_config, "key = value settings file")->check(CLI::ExistingFile);
  serve_flags.string(serve, "mock-script", "scripted mock provider (JSON)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan) return critics::cli::cmd_plan({inputs, output_dir, plan_opts.settings()});
    if (*text) return critics::cli::cmd_text({inputs, output_dir, text_opts.settings()});
    if (*eval) return critics::cli::cmd_eval(manifest, output_dir, eval_opts.settings());
    if (data_dir) {
      serve_opts.data_dir = *data_dir;
    } else if (const char* env = std::getenv("CRITICS_DATA_DIR"); env && *env) {
      serve_opts.data_dir = env;
    } else {
      serve_opts.data_dir = "critics-data";
    }
    Settings file = serve_config ? critics::cli::load_config_file(*serve_config) : Settings{};
    serve_opts.settings = critics::cli::merge(std::move(file), serve_flags.flags);
    return critics::cli::cmd_serve(serve_opts);
  } catch (const critics::Error& e) {
    std::cerr << "critics: " << critics::to_string(e.code()) << ": " << e.what() << "\n";
    return 2;
  }
}
