#include "sysid/format.hpp"

#include <stdexcept>

namespace sysid {

double parse_double(std::string_view field) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw std::invalid_argument("not a number: '" + std::string(field) + "'");
  }
  return v;
}

long parse_long(std::string_view field) {
  long v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw std::invalid_argument("not an integer: '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace sysid
