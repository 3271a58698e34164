#include "critics/stage.hpp"

#include "critics/error.hpp"

namespace critics {

std::string_view to_string(Stage stage) { return stage == Stage::Plan ? "plan" : "text"; }

Stage parse_stage(std::string_view name) {
  if (name == "plan") return Stage::Plan;
  if (name == "text") return Stage::Text;
  throw Error(ErrorCode::InvalidConfig, "unknown stage '" + std::string(name) + "'", std::string(name));
}

}  // namespace critics
