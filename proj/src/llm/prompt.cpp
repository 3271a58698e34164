#include "critics/llm/prompt.hpp"

#include <fstream>
#include <sstream>

#include "critics/error.hpp"

namespace critics::llm {

// Generated from prompts/*.txt at build time.
std::vector<std::pair<std::string_view, std::string_view>> embedded_prompts();

namespace {

template <typename Visitor>
void scan_slots(std::string_view body, Visitor&& visit_slot) {
  std::size_t pos = 0;
  while (true) {
    auto open = body.find("{{", pos);
    if (open == std::string_view::npos) break;
    auto close = body.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    visit_slot(open, close + 2, body.substr(open + 2, close - open - 2));
    pos = close + 2;
  }
}

// Template files end with a newline that is not part of the prompt.
std::string without_final_newline(std::string body) {
  if (!body.empty() && body.back() == '\n') body.pop_back();
  if (!body.empty() && body.back() == '\r') body.pop_back();
  return body;
}

}  // namespace

PromptTemplate PromptTemplate::from_body(std::string id, std::string body) {
  PromptTemplate t{std::move(id), std::move(body), {}};
  scan_slots(t.body, [&](std::size_t, std::size_t, std::string_view name) {
    t.required_slots.emplace(name);
  });
  return t;
}

std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings,
                          SlotPolicy policy) {
  for (const auto& slot : tmpl.required_slots) {
    if (!bindings.contains(slot)) {
      throw Error(ErrorCode::MissingSlot,
                  "template '" + tmpl.id + "' needs slot '" + slot + "'", slot);
    }
  }
  if (policy == SlotPolicy::Strict) {
    for (const auto& [key, _] : bindings) {
      if (!tmpl.required_slots.contains(key)) {
        throw Error(ErrorCode::UnknownSlot,
                    "template '" + tmpl.id + "' has no slot '" + key + "'", key);
      }
    }
  }
  std::string out;
  std::size_t copied = 0;
  scan_slots(tmpl.body, [&](std::size_t open, std::size_t close, std::string_view name) {
    out.append(tmpl.body, copied, open - copied);
    out.append(bindings.find(std::string(name))->second);
    copied = close;
  });
  out.append(tmpl.body, copied, std::string::npos);
  return out;
}

const PromptCatalog& PromptCatalog::builtin() {
  static const PromptCatalog catalog = [] {
    PromptCatalog c;
    for (auto [id, body] : embedded_prompts()) {
      c.add(PromptTemplate::from_body(std::string(id), without_final_newline(std::string(body))));
    }
    return c;
  }();
  return catalog;
}

void PromptCatalog::add(PromptTemplate tmpl) {
  auto id = tmpl.id;
  templates_.insert_or_assign(std::move(id), std::move(tmpl));
}

void PromptCatalog::overlay_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorCode::InvalidConfig, "prompt directory not found: " + dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    add(PromptTemplate::from_body(entry.path().stem().string(), without_final_newline(buf.str())));
  }
}

bool PromptCatalog::contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

const PromptTemplate& PromptCatalog::get(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) {
    throw Error(ErrorCode::UnknownTemplate, "no prompt template '" + std::string(id) + "'",
                std::string(id));
  }
  return it->second;
}

std::vector<std::string> PromptCatalog::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : templates_) out.push_back(id);
  return out;
}

}  // namespace critics::llm
