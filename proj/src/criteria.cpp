#include "critics/criteria.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "critics/error.hpp"
#include "critics/text_util.hpp"

namespace critics {

std::vector<std::pair<std::string_view, std::string_view>> embedded_criteria();

void to_json(nlohmann::json& j, const Criterion& c) {
  j = {{"id", c.id}, {"name", c.name}, {"rubric", c.rubric}, {"stage", std::string(to_string(c.stage))}};
}

void from_json(const nlohmann::json& j, Criterion& c) {
  // A bare id names a built-in criterion.
  if (j.is_string()) {
    c = select_criteria(builtin_criteria(), {j.get<std::string>()}).at(0);
    return;
  }
  c.id = j.at("id").get<std::string>();
  c.name = j.value("name", c.id);
  c.rubric = j.at("rubric").get<std::string>();
  c.stage = parse_stage(j.value("stage", std::string("plan")));
}

std::vector<Criterion> parse_criteria(const nlohmann::json& doc) {
  if (!doc.is_array()) throw Error(ErrorCode::InvalidConfig, "criteria catalog must be a JSON array");
  std::vector<Criterion> out;
  std::set<std::string> seen;
  for (const auto& entry : doc) {
    Criterion c;
    try {
      c = entry.get<Criterion>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, std::string("criteria catalog: ") + e.what());
    }
    if (c.id.empty()) throw Error(ErrorCode::InvalidConfig, "criterion with empty id");
    if (text::trim(c.rubric).empty()) throw Error(ErrorCode::InvalidConfig, "criterion '" + c.id + "' has no rubric", c.id);
    if (!seen.insert(c.id).second) throw Error(ErrorCode::InvalidConfig, "duplicate criterion '" + c.id + "'", c.id);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Criterion> load_criteria(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read criteria file " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_criteria(nlohmann::json::parse(buf.str()));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, "criteria file " + file.string() + ": " + e.what());
  }
}

const std::vector<Criterion>& builtin_criteria() {
  static const std::vector<Criterion> catalog =
      parse_criteria(nlohmann::json::parse(embedded_criteria().at(0).second));
  return catalog;
}

std::vector<Criterion> default_plan_criteria() {
  return select_criteria(builtin_criteria(), {"originality", "structure", "ending"});
}

std::vector<Criterion> select_criteria(const std::vector<Criterion>& catalog, const std::vector<std::string>& ids) {
  std::vector<Criterion> out;
  for (const auto& id : ids) {
    auto it = std::find_if(catalog.begin(), catalog.end(), [&](const Criterion& c) { return c.id == id; });
    if (it == catalog.end()) throw Error(ErrorCode::InvalidConfig, "unknown criterion '" + id + "'", id);
    out.push_back(*it);
  }
  return out;
}

}  // namespace critics
