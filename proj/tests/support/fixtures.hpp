#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

inline std::filesystem::path fixture_path(const std::string& name) {
  return std::filesystem::path(CRITICS_FIXTURES) / name;
}

inline std::string read_fixture(const std::string& name) {
  std::ifstream in(fixture_path(name), std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}
