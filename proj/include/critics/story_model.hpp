#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace critics {

struct CharacterEntry {
  std::string name;
  std::string description;

  bool operator==(const CharacterEntry&) const = default;
};

struct OutlineItem {
  std::string label;
  std::string summary;
  std::optional<std::string> scene;  // present-but-empty is legal ("Scene:  Characters: ...")
  std::vector<std::string> characters;
  std::vector<OutlineItem> children;

  bool operator==(const OutlineItem&) const = default;
};

struct Outline {
  std::vector<OutlineItem> items;

  bool operator==(const Outline&) const = default;
};

/// Premise, setting, character sheet and a two-level outline: the subject that
/// the plan-refinement loop critiques and rewrites.
struct StoryPackage {
  std::string premise;
  std::string setting;
  std::vector<CharacterEntry> characters;
  Outline outline;

  bool operator==(const StoryPackage&) const = default;
};

/// Parses the canonical package layout:
///
///     Premise: ...
///     Setting: ...            ("Settings:" is accepted too)
///     Characters:
///     Name: description
///     Outline:
///     1. summary Scene: ... Characters: A, B
///     a. summary Scene: ... Characters: A
///
/// Headers are matched case-insensitively and must appear in this order.
/// Throws Error{MissingSection} / Error{OutlineParseError} / Error{InvalidPackage}.
StoryPackage parse_story_package(std::string_view raw);

/// Canonical text; `parse_story_package(render_story_package(p)) == p`.
std::string render_story_package(const StoryPackage& pkg);

/// Outline section only (no "Outline:" header), one item per line.
std::string render_outline(const Outline& outline);

/// Parses outline lines without any section header.
Outline parse_outline(std::string_view raw);

/// Text-level canonical form used to define the round-trip: LF line endings,
/// lines trimmed, whitespace runs collapsed, blank lines dropped, section
/// headers spelled canonically and preceded by one blank line.
std::string normalize_package_text(std::string_view raw);

/// Throws Error{InvalidPackage} when a hard invariant is broken.
void validate(const StoryPackage& pkg);

/// Outline character references that have no entry in `characters`
/// (warn-level; names compared ignoring case and whitespace).
std::vector<std::string> undeclared_characters(const StoryPackage& pkg);

/// Appends an empty-description entry for every undeclared character.
StoryPackage merge_new_characters(StoryPackage pkg);

void to_json(nlohmann::json& j, const CharacterEntry& c);
void from_json(const nlohmann::json& j, CharacterEntry& c);
void to_json(nlohmann::json& j, const OutlineItem& item);
void from_json(const nlohmann::json& j, OutlineItem& item);
void to_json(nlohmann::json& j, const StoryPackage& pkg);
void from_json(const nlohmann::json& j, StoryPackage& pkg);

}  // namespace critics
