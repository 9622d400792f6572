#pragma once

// key=value configuration text: one assignment per line, '#' starts a
// comment, blank lines ignored. Later assignments override earlier ones.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "shotfuse/errors.hpp"

namespace shotfuse {

struct KeyValues {
  /// In first-seen order.
  std::vector<std::pair<std::string, std::string>> entries;
  std::string source;

  static KeyValues parse(const std::string& text, const std::string& source);
  static KeyValues load(const std::string& path);

  const std::string* find(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  /// Throws ConfigError naming the first key not in `known`.
  void require_known(const std::vector<std::string>& known) const;
  std::string to_text() const;
};

/// Value parsers; each throws ConfigError mentioning `key` on malformed input.
double parse_double(const std::string& key, const std::string& value);
std::int64_t parse_int(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
/// "lo,hi" with lo <= hi.
std::pair<double, double> parse_range(const std::string& key, const std::string& value);
std::string format_double(double v);

}  // namespace shotfuse
