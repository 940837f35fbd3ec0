#pragma once

#include <charconv>
#include <string>

namespace paramnet::detail {

// Shortest representation that round-trips; locale independent.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace paramnet::detail
