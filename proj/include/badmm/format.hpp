#ifndef BADMM_FORMAT_HPP_
#define BADMM_FORMAT_HPP_

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <system_error>

namespace badmm {

/// Shortest decimal string that parses back to the same double. Falls back to
/// 17 significant digits if to_chars is unavailable for the value. Non-finite
/// values print as "nan", "inf", "-inf".
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec == std::errc()) return std::string(buf, ptr);
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Parses a full token as a double; accepts "nan"/"inf" spellings.
inline bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace badmm

#endif  // BADMM_FORMAT_HPP_
