#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace critics::llm {

/// A prompt body with `{{slot}}` placeholders. `required_slots` is always the
/// exact set of placeholders found in `body`.
struct PromptTemplate {
  std::string id;
  std::string body;
  std::set<std::string> required_slots;

  static PromptTemplate from_body(std::string id, std::string body);
};

using Bindings = std::map<std::string, std::string>;

enum class SlotPolicy {
  Strict,   // bindings outside required_slots raise UnknownSlot
  Lenient,  // extra bindings are ignored
};

/// Throws Error{MissingSlot} / Error{UnknownSlot}.
std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings,
                          SlotPolicy policy = SlotPolicy::Strict);

/// Templates keyed by id. `builtin()` holds the set compiled into the binary
/// from prompts/*.txt; `overlay_directory` replaces entries with `<id>.txt`
/// files from a user directory.
class PromptCatalog {
 public:
  static const PromptCatalog& builtin();

  void add(PromptTemplate tmpl);
  void overlay_directory(const std::filesystem::path& dir);
  bool contains(std::string_view id) const;
  /// Throws Error{UnknownTemplate}.
  const PromptTemplate& get(std::string_view id) const;
  std::string render(std::string_view id, const Bindings& bindings) const {
    return render_prompt(get(id), bindings);
  }
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

}  // namespace critics::llm
