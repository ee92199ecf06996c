#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace crowdlab {

// Shortest decimal string that round-trips the double exactly.
inline std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace crowdlab
