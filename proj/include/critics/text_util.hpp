#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace critics::text {

std::string_view trim(std::string_view s);
/// Collapses every run of ASCII whitespace to one space and trims both ends.
std::string squash(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);
/// Case-insensitive substring search; npos when absent.
std::size_t ifind(std::string_view haystack, std::string_view needle,
                  std::size_t from = 0);
/// Splits on '\n' after converting CRLF/CR to LF. Keeps empty lines.
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::vector<std::string> split(std::string_view s, char sep);
/// Removes leading/trailing markdown emphasis (`**`, `__`) and `//` placeholder
/// fences that chat models tend to echo back from format templates.
std::string strip_decoration(std::string_view s);

}  // namespace critics::text
