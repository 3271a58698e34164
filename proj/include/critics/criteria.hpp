#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "critics/stage.hpp"

namespace critics {

struct Criterion {
  std::string id;
  std::string name;
  std::string rubric;
  Stage stage = Stage::Plan;

  bool operator==(const Criterion&) const = default;
};

/// Catalog JSON: an array of {id, name, rubric, stage}. Throws
/// Error{InvalidConfig} on duplicate ids, empty rubrics or bad stages.
std::vector<Criterion> parse_criteria(const nlohmann::json& doc);
std::vector<Criterion> load_criteria(const std::filesystem::path& file);

/// The catalog compiled in from criteria/default.json.
const std::vector<Criterion>& builtin_criteria();
/// originality, structure, ending: the default plan-stage critics.
std::vector<Criterion> default_plan_criteria();

/// Picks `ids` from `catalog` in the order given; throws Error{InvalidConfig}
/// for unknown ids.
std::vector<Criterion> select_criteria(const std::vector<Criterion>& catalog,
                                       const std::vector<std::string>& ids);

void to_json(nlohmann::json& j, const Criterion& c);
void from_json(const nlohmann::json& j, Criterion& c);

}  // namespace critics
