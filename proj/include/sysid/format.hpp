#pragma once

#include <charconv>
#include <string>
#include <string_view>

namespace sysid {

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Parses a full field as a double; throws std::invalid_argument otherwise.
double parse_double(std::string_view field);
long parse_long(std::string_view field);

}  // namespace sysid
