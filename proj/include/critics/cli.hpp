#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "critics/crplan.hpp"
#include "critics/crtext.hpp"
#include "critics/error.hpp"
#include "critics/llm/chat.hpp"

namespace critics::cli {

/// Flat "key -> value" settings. Keys match the long flag names with dashes
/// turned into underscores; provider keys carry a "provider." prefix.
using Settings = std::map<std::string, std::string>;

/// Config file grammar, one setting per line:
///
///   # comment            (also ';')
///   rounds = 3
///   criteria = originality, ending
///   leader = false
///   [provider]            keys below become provider.<key>
///   endpoint_url = https://example.test/v1/chat/completions
///
/// Values may be wrapped in double quotes. Unknown keys are rejected by the
/// consumers, not here. Throws Error{InvalidConfig} with the line number.
Settings parse_config_text(std::string_view text);
Settings load_config_file(const std::filesystem::path& file);

/// `flags` win over `file`.
Settings merge(Settings file, const Settings& flags);

/// Throws Error{InvalidConfig} on keys outside `allowed` or malformed values.
void check_keys(const Settings& s, const std::vector<std::string>& allowed);
CrPlanConfig plan_config(const Settings& s);
CrTextConfig text_config(const Settings& s);
llm::ProviderConfig provider_config(const Settings& s);

struct RunManifest {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output_dir;
  Settings settings;  // already merged
};

/// Keys accepted by each command.
const std::vector<std::string>& plan_keys();
const std::vector<std::string>& text_keys();
const std::vector<std::string>& eval_keys();

/// One line of summary.json.
struct ItemReport {
  std::string input;
  bool ok = false;
  std::vector<std::string> outputs;  // file names under output_dir
  std::optional<Error> error;
};

struct BatchReport {
  std::string command;
  std::vector<ItemReport> items;

  std::size_t failures() const;
};

void to_json(nlohmann::json& j, const ItemReport& r);
void to_json(nlohmann::json& j, const BatchReport& r);

/// Each input is a story package; writes <stem>.result.json (the CrPlanResult)
/// and <stem>.plan.txt (the selected candidate), then summary.json. Returns
/// the exit code: 0 iff every input succeeded.
int cmd_plan(const RunManifest& m);
/// Each input is a story; writes <stem>.result.json and <stem>.story.txt.
int cmd_text(const RunManifest& m);

/// Eval manifest JSON (paths relative to the manifest):
///   {"stage": "plan" | "text",
///    "pairs": [{"id": "p1", "a": "a.txt", "b": "b.txt",
///               "human": {"ann1": ["A", "B", "Both", "A"]}}]}
/// "a_text" / "b_text" inline the items. Writes win_rates.json (judge
/// verdicts + WinRateTable), agreement.json (judge vs. humans over every
/// pair x metric) and summary.json.
int cmd_eval(const std::filesystem::path& manifest, const std::filesystem::path& output_dir,
             const Settings& settings);

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir;
  std::optional<std::filesystem::path> ui_dir;
  Settings settings;  // mock_script, provider.*
  /// Called with the bound port once requests are being accepted.
  std::function<void(int port)> on_listening;
};

/// Blocks until SIGINT / SIGTERM. Throws Error{BindFailure} / Error{StorageError}.
int cmd_serve(const ServeOptions& opts);

/// Mock backend from settings["mock_script"] (fresh per call, so each input
/// replays the whole script), else the HTTP provider.
llm::LlmClient make_client(const Settings& s);

}  // namespace critics::cli
