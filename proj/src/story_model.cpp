#include "critics/story_model.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "critics/error.hpp"
#include "critics/text_util.hpp"

namespace critics {

namespace {

enum class Section { Premise, Setting, Characters, Outline };

constexpr std::string_view kCanonicalHeader[] = {"Premise:", "Setting:", "Characters:",
                                                 "Outline:"};
constexpr std::string_view kSectionName[] = {"Premise", "Setting", "Characters", "Outline"};

struct HeaderMatch {
  Section section;
  std::string rest;  // text after the colon, trimmed
};

std::optional<HeaderMatch> match_header(std::string_view line) {
  static constexpr std::pair<std::string_view, Section> kHeaders[] = {
      {"premise:", Section::Premise},       {"settings:", Section::Setting},
      {"setting:", Section::Setting},       {"characters:", Section::Characters},
      {"outline:", Section::Outline},
  };
  line = text::trim(line);
  for (auto [prefix, section] : kHeaders) {
    if (text::istarts_with(line, prefix)) {
      return HeaderMatch{section, text::squash(line.substr(prefix.size()))};
    }
  }
  return std::nullopt;
}

std::string name_key(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return key;
}

bool is_top_label(std::string_view line, std::size_t& label_end) {
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == 0 || i >= line.size() || line[i] != '.') return false;
  label_end = i;
  return true;
}

bool is_child_label(std::string_view line) {
  return line.size() >= 2 && line[0] >= 'a' && line[0] <= 'z' && line[1] == '.' &&
         (line.size() == 2 || line[2] == ' ' || line[2] == '\t');
}

std::vector<std::string> split_character_list(std::string_view list) {
  std::vector<std::string> out;
  for (auto& part : text::split(list, ',')) {
    auto name = text::squash(part);
    if (!name.empty()) out.push_back(std::move(name));
  }
  return out;
}

// Splits "<summary> Scene: <scene> Characters: <a, b>" into its parts.
void parse_item_tail(std::string_view body, OutlineItem& item) {
  auto scene_pos = body.find("Scene:");
  auto chars_pos = body.find("Characters:", scene_pos == std::string_view::npos ? 0 : scene_pos);
  auto summary_end = std::min(scene_pos, chars_pos);
  item.summary = text::squash(body.substr(0, summary_end));
  if (scene_pos != std::string_view::npos) {
    auto start = scene_pos + 6;
    auto end = chars_pos == std::string_view::npos ? body.size() : chars_pos;
    item.scene = text::squash(body.substr(start, end - start));
  }
  if (chars_pos != std::string_view::npos) {
    item.characters = split_character_list(body.substr(chars_pos + 11));
  }
}

std::string render_item(const OutlineItem& item) {
  std::string line = item.label + ". " + item.summary;
  if (item.scene) {
    line += " Scene:";
    if (!item.scene->empty()) line += " " + *item.scene;
  }
  if (!item.characters.empty()) line += " Characters: " + text::join(item.characters, ", ");
  return line;
}

[[noreturn]] void outline_error(std::size_t line_no, const std::string& reason) {
  throw Error(ErrorCode::OutlineParseError,
              "outline line " + std::to_string(line_no) + ": " + reason,
              std::to_string(line_no));
}

Outline parse_outline_lines(const std::vector<std::string>& lines, std::size_t first_line_no) {
  Outline outline;
  OutlineItem* last = nullptr;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = first_line_no + i;
    std::string_view line = text::trim(lines[i]);
    if (line.empty()) continue;
    std::size_t label_end = 0;
    if (is_top_label(line, label_end)) {
      OutlineItem item;
      item.label = std::string(line.substr(0, label_end));
      auto expected = std::to_string(outline.items.size() + 1);
      if (item.label != expected) {
        outline_error(line_no, "expected item " + expected + ", found " + item.label);
      }
      parse_item_tail(line.substr(label_end + 1), item);
      if (item.summary.empty()) outline_error(line_no, "empty summary");
      outline.items.push_back(std::move(item));
      last = &outline.items.back();
    } else if (is_child_label(line)) {
      if (outline.items.empty()) outline_error(line_no, "child item before any numbered item");
      auto& parent = outline.items.back();
      OutlineItem child;
      child.label = std::string(1, line[0]);
      std::string expected(1, static_cast<char>('a' + parent.children.size()));
      if (child.label != expected) {
        outline_error(line_no, "expected child " + expected + ", found " + child.label);
      }
      parse_item_tail(line.substr(2), child);
      if (child.summary.empty()) outline_error(line_no, "empty summary");
      parent.children.push_back(std::move(child));
      last = &parent.children.back();
    } else if (last && (line.starts_with("Scene:") || line.starts_with("Characters:"))) {
      // Tail written on its own line under the item it belongs to.
      OutlineItem tail;
      parse_item_tail(line, tail);
      if (tail.scene) last->scene = tail.scene;
      for (auto& c : tail.characters) last->characters.push_back(std::move(c));
    } else {
      outline_error(line_no, "line matches no outline production: '" + std::string(line) + "'");
    }
  }
  return outline;
}

}  // namespace

StoryPackage parse_story_package(std::string_view raw) {
  auto lines = text::split_lines(raw);

  // Locate headers in order; anything before "Premise:" is ignored.
  std::size_t header_line[4];
  std::string header_rest[4];
  std::size_t cursor = 0;
  for (int s = 0; s < 4; ++s) {
    bool found = false;
    for (std::size_t i = cursor; i < lines.size(); ++i) {
      auto h = match_header(lines[i]);
      if (h && static_cast<int>(h->section) == s) {
        header_line[s] = i;
        header_rest[s] = h->rest;
        cursor = i + 1;
        found = true;
        break;
      }
    }
    if (!found) {
      throw Error(ErrorCode::MissingSection,
                  "missing section '" + std::string(kSectionName[s]) + "'",
                  std::string(kSectionName[s]));
    }
  }

  auto section_text = [&](int s) {
    std::vector<std::string> parts;
    if (!header_rest[s].empty()) parts.push_back(header_rest[s]);
    for (std::size_t i = header_line[s] + 1; i < header_line[s + 1]; ++i) {
      auto t = text::squash(lines[i]);
      if (!t.empty()) parts.push_back(std::move(t));
    }
    return text::join(parts, " ");
  };

  StoryPackage pkg;
  pkg.premise = section_text(0);
  pkg.setting = section_text(1);

  std::vector<std::string> char_lines;
  if (!header_rest[2].empty()) char_lines.push_back(header_rest[2]);
  for (std::size_t i = header_line[2] + 1; i < header_line[3]; ++i) char_lines.push_back(lines[i]);
  for (auto& raw_line : char_lines) {
    auto line = text::squash(raw_line);
    if (line.empty()) continue;
    CharacterEntry entry;
    auto colon = line.find(':');
    if (colon == std::string::npos) {
      entry.name = line;
    } else {
      entry.name = text::squash(std::string_view(line).substr(0, colon));
      entry.description = text::squash(std::string_view(line).substr(colon + 1));
    }
    pkg.characters.push_back(std::move(entry));
  }

  std::vector<std::string> outline_lines;
  if (!header_rest[3].empty()) outline_lines.push_back(header_rest[3]);
  for (std::size_t i = header_line[3] + 1; i < lines.size(); ++i) outline_lines.push_back(lines[i]);
  pkg.outline = parse_outline_lines(outline_lines, header_line[3] + (header_rest[3].empty() ? 2 : 1));

  validate(pkg);
  return pkg;
}

Outline parse_outline(std::string_view raw) {
  return parse_outline_lines(text::split_lines(raw), 1);
}

std::string render_outline(const Outline& outline) {
  std::string out;
  for (const auto& item : outline.items) {
    out += render_item(item) + "\n";
    for (const auto& child : item.children) out += render_item(child) + "\n";
  }
  return out;
}

std::string render_story_package(const StoryPackage& pkg) {
  auto header_line = [](std::string_view header, const std::string& value) {
    return value.empty() ? std::string(header) : std::string(header) + " " + value;
  };
  std::string out;
  out += header_line("Premise:", pkg.premise) + "\n\n";
  out += header_line("Setting:", pkg.setting) + "\n\n";
  out += "Characters:\n";
  for (const auto& c : pkg.characters) {
    out += c.description.empty() ? c.name + ":\n" : c.name + ": " + c.description + "\n";
  }
  out += "\nOutline:\n";
  out += render_outline(pkg.outline);
  return out;
}

std::string normalize_package_text(std::string_view raw) {
  std::string out;
  bool started = false;  // prose before the Premise header is not part of the package
  bool in_outline = false;
  for (const auto& line : text::split_lines(raw)) {
    auto squashed = text::squash(line);
    if (squashed.empty()) continue;
    if (!in_outline) {
      auto h = match_header(squashed);
      if (!started) {
        if (!h || h->section != Section::Premise) continue;
        started = true;
      }
      if (h) {
        auto idx = static_cast<int>(h->section);
        if (h->section != Section::Premise && !out.empty()) out += "\n";
        out += std::string(kCanonicalHeader[idx]);
        if (!h->rest.empty()) out += " " + h->rest;
        out += "\n";
        in_outline = h->section == Section::Outline;
        continue;
      }
    }
    out += squashed + "\n";
  }
  return out;
}

void validate(const StoryPackage& pkg) {
  if (text::trim(pkg.premise).empty()) {
    throw Error(ErrorCode::InvalidPackage, "premise is empty");
  }
  std::set<std::string> names;
  for (const auto& c : pkg.characters) {
    if (text::trim(c.name).empty()) {
      throw Error(ErrorCode::InvalidPackage, "character with empty name");
    }
    if (!names.insert(c.name).second) {
      throw Error(ErrorCode::InvalidPackage, "duplicate character '" + c.name + "'", c.name);
    }
  }
  for (std::size_t i = 0; i < pkg.outline.items.size(); ++i) {
    const auto& item = pkg.outline.items[i];
    if (item.label != std::to_string(i + 1)) {
      throw Error(ErrorCode::InvalidPackage, "outline label gap at item " + std::to_string(i + 1));
    }
    if (item.summary.empty()) throw Error(ErrorCode::InvalidPackage, "empty outline summary");
    if (item.children.size() > 26) {
      throw Error(ErrorCode::InvalidPackage, "more than 26 children under item " + item.label);
    }
    for (std::size_t k = 0; k < item.children.size(); ++k) {
      const auto& child = item.children[k];
      if (child.label != std::string(1, static_cast<char>('a' + k))) {
        throw Error(ErrorCode::InvalidPackage, "child label gap under item " + item.label);
      }
      if (child.summary.empty()) throw Error(ErrorCode::InvalidPackage, "empty outline summary");
      if (!child.children.empty()) {
        throw Error(ErrorCode::InvalidPackage, "outline deeper than two levels");
      }
    }
  }
}

std::vector<std::string> undeclared_characters(const StoryPackage& pkg) {
  std::set<std::string> known;
  for (const auto& c : pkg.characters) known.insert(name_key(c.name));
  std::vector<std::string> missing;
  std::set<std::string> reported;
  auto visit = [&](const OutlineItem& item) {
    for (const auto& name : item.characters) {
      auto key = name_key(name);
      if (!known.contains(key) && reported.insert(key).second) missing.push_back(name);
    }
  };
  for (const auto& item : pkg.outline.items) {
    visit(item);
    for (const auto& child : item.children) visit(child);
  }
  return missing;
}

StoryPackage merge_new_characters(StoryPackage pkg) {
  for (auto& name : undeclared_characters(pkg)) pkg.characters.push_back({name, ""});
  return pkg;
}

void to_json(nlohmann::json& j, const CharacterEntry& c) {
  j = {{"name", c.name}, {"description", c.description}};
}

void from_json(const nlohmann::json& j, CharacterEntry& c) {
  j.at("name").get_to(c.name);
  c.description = j.value("description", "");
}

void to_json(nlohmann::json& j, const OutlineItem& item) {
  j = {{"label", item.label},
       {"summary", item.summary},
       {"scene", item.scene ? nlohmann::json(*item.scene) : nlohmann::json(nullptr)},
       {"characters", item.characters},
       {"children", item.children}};
}

void from_json(const nlohmann::json& j, OutlineItem& item) {
  j.at("label").get_to(item.label);
  j.at("summary").get_to(item.summary);
  if (auto it = j.find("scene"); it != j.end() && !it->is_null()) {
    item.scene = it->get<std::string>();
  } else {
    item.scene.reset();
  }
  item.characters = j.value("characters", std::vector<std::string>{});
  item.children = j.value("children", std::vector<OutlineItem>{});
}

void to_json(nlohmann::json& j, const StoryPackage& pkg) {
  j = {{"premise", pkg.premise},
       {"setting", pkg.setting},
       {"characters", pkg.characters},
       {"outline", pkg.outline.items}};
}

void from_json(const nlohmann::json& j, StoryPackage& pkg) {
  j.at("premise").get_to(pkg.premise);
  pkg.setting = j.value("setting", "");
  pkg.characters = j.value("characters", std::vector<CharacterEntry>{});
  pkg.outline.items = j.value("outline", std::vector<OutlineItem>{});
}

}  // namespace critics
