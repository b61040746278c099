#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <system_error>

namespace silvaflux {

/// Fixed-point text with `decimals` digits; used by human-facing reports.
inline std::string format_fixed(double value, int decimals = 3) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string out(buf, static_cast<std::size_t>(n));
  if (out.find_first_not_of("-0.") == std::string::npos && out[0] == '-') out.erase(0, 1);
  return out;
}

/// Shortest text that reads back to the same double; used by every
/// machine-readable output.
inline std::string format_exact(double value) {
  char buf[400];
  const double magnitude = value < 0 ? -value : value;
  const bool plain = magnitude == 0.0 || (magnitude >= 1e-5 && magnitude < 1e16);
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value,
                                 plain ? std::chars_format::fixed : std::chars_format::scientific);
  (void)ec;
  return std::string(buf, end);
}

}  // namespace silvaflux
