#pragma once

#include <string>
#include <string_view>

namespace critics {

enum class Stage { Plan, Text };

std::string_view to_string(Stage stage);
/// Accepts "plan" / "text"; throws Error{InvalidConfig}.
Stage parse_stage(std::string_view name);

}  // namespace critics
