#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "forge/error.hpp"

namespace forge {

/// Flat `key = value` documents with optional `[section]` headers (keys become
/// `section.key`), `#` comments and optionally double-quoted values. This is
/// the subset of TOML the config and grammar files use.
using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline KeyValues parse_key_values(std::string_view text, const std::string& origin = "<string>") {
  KeyValues out;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fail = [&](const std::string& why) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + why);
    };
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'");
    std::string key(detail::trim(line.substr(0, eq)));
    std::string_view value = detail::trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (!value.empty() && value.front() == '"') {
      const auto close = value.find('"', 1);
      if (close == std::string_view::npos) fail("unterminated string");
      const auto rest = detail::trim(value.substr(close + 1));
      if (!rest.empty() && rest.front() != '#') fail("trailing characters after string");
      value = value.substr(1, close - 1);
    } else {
      const auto hash = value.find(" #");
      if (hash != std::string_view::npos) value = detail::trim(value.substr(0, hash));
    }
    if (!section.empty()) key = section + "." + key;
    out[key] = std::string(value);
  }
  return out;
}

inline KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

}  // namespace forge
